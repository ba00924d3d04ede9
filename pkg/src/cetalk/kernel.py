"""Controlled-English domain model and knowledge base.

Holds the concept hierarchy, property definitions, synonym lexicon,
instances and facts with provenance, plus the lookup and fresh-id
services everything else is built on.  Names are case-folded for lookup
but stored in declared case; literal property values keep their case.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, replace

from . import ce

# Range marker for literal-valued (attribute) properties.
VALUE = "value"
# Reserved pseudo-property for type assertions ("v48 is a moving thing").
IS_A = "is a"


class CeError(Exception):
    """Base class for knowledge-base and model errors."""


class ModelError(CeError):
    """A statement violates the model (bad reference, domain/range)."""


class UnknownIdError(CeError):
    """A referenced instance, fact or concept does not exist."""


def fold(text: str) -> str:
    return text.casefold()


def surface_key(words) -> tuple[str, ...]:
    """Case-folded lookup key for a word sequence."""
    if isinstance(words, str):
        words = words.split()
    return tuple(fold(w) for w in words)


@dataclass(frozen=True)
class Concept:
    """A concept in the hierarchy, e.g. vehicle or suspect sighting."""

    name: str
    parents: tuple[str, ...] = ()
    is_entity: bool = True


@dataclass(frozen=True)
class PropertyDef:
    """An attribute (literal range) or relation (concept range).

    Identity is the domain:name:range triple; ``verb_phrase`` controls
    the surface form ("is married to the person p2" rather than
    "has the person p2 as spouse").
    """

    domain: str
    name: str
    range: str = VALUE
    verb_phrase: bool = False

    @property
    def identity(self) -> str:
        return f"{self.domain}:{self.name}:{self.range}"

    @property
    def is_attribute(self) -> bool:
        return self.range == VALUE


@dataclass(frozen=True)
class Told:
    """Provenance for a fact asserted by some source."""

    source: str
    conversation: str | None = None
    timestamp: str | None = None


@dataclass(frozen=True)
class Inferred:
    """Provenance for a fact produced by a rule from premise facts."""

    rule: str
    premises: tuple[str, ...] = ()


Provenance = Told | Inferred


@dataclass
class Instance:
    """A ground individual: id, primary concept, optional label/description."""

    id: str
    concept: str
    label: str | None = None
    description: str | None = None


@dataclass(frozen=True)
class Fact:
    """A ground assertion subject/property/object with provenance.

    ``property`` is a PropertyDef identity, or IS_A for type assertions
    (object is then a concept name).  For attributes the object is a
    literal string, for relations an instance id.
    """

    id: str
    subject: str
    property: str
    object: str
    provenance: Provenance | None = None

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.subject, self.property, self.object)


@dataclass(frozen=True)
class Match:
    """A lexicon hit: kind is "concept", "instance" or "property"."""

    kind: str
    key: str  # concept name, instance id, or property identity


_KIND_RANK = {"instance": 0, "concept": 1, "property": 2}


def preferred_match(matches) -> Match | None:
    """Tie-break a set of matches: instance > concept > property.

    Named individuals beat everything; a concept beats a property of
    the same name (e.g. "colour" names both the concept and vehicle's
    colour property), since the value instance still attaches through
    the property's range."""
    if not matches:
        return None
    return sorted(matches, key=lambda m: (_KIND_RANK[m.kind], m.key))[0]


@dataclass(frozen=True)
class Pattern:
    """A fact pattern with optional subject/property/object/concept.

    ``property`` may be a full identity or a bare property name; the
    subject may additionally be constrained by ``concept`` which is
    matched up to subtype.
    """

    subject: str | None = None
    property: str | None = None
    object: str | None = None
    concept: str | None = None


_ID_SHAPE = re.compile(r"([^\W\d_]+)(\d+)", re.UNICODE)


class KnowledgeBase:
    """Model plus ground facts, with single-writer mutation discipline.

    Mutating calls are serialized through ``lock`` by callers that share
    a KB across threads; reads between mutations need no coordination.
    """

    def __init__(self) -> None:
        self.concepts: dict[str, Concept] = {}
        self.properties: dict[str, PropertyDef] = {}
        self.instances: dict[str, Instance] = {}
        self.facts: list[Fact] = []
        self.synonyms: list[tuple[str, Match]] = []
        self.lock = threading.RLock()
        self._concepts_folded: dict[str, str] = {}
        self._props_by_name: dict[str, list[PropertyDef]] = {}
        self._props_by_domain: dict[str, list[PropertyDef]] = {}
        self._facts_by_id: dict[str, Fact] = {}
        self._facts_by_triple: dict[tuple[str, str, str], Fact] = {}
        self._extra_types: dict[str, list[str]] = {}
        self._lexicon: dict[tuple[str, ...], set[Match]] = {}
        self._counters: dict[str, int] = {}
        self._reserved_ids: set[str] = set()
        self._fact_seq = 0

    # ------------------------------------------------------------------
    # model: concepts and properties

    def add_concepts(self, concepts: list[Concept]) -> None:
        """Declare a batch of concepts; forward references within the
        batch are allowed, unresolved parents or cycles are errors."""
        staged = dict(self.concepts)
        for concept in concepts:
            if not concept.name.strip():
                raise ModelError("concept name must be non-empty")
            prior = staged.get(concept.name)
            if prior is not None and set(prior.parents) != set(concept.parents):
                raise ModelError(
                    f"concept '{concept.name}' redeclared with conflicting parents"
                )
            staged[concept.name] = concept
        for concept in concepts:
            for parent in concept.parents:
                if parent not in staged:
                    raise ModelError(
                        f"concept '{concept.name}' names undeclared parent '{parent}'"
                    )
        self._check_acyclic(staged)
        for concept in concepts:
            if concept.name not in self.concepts:
                self.concepts[concept.name] = concept
                self._concepts_folded[fold(concept.name)] = concept.name
                self._index(surface_key(concept.name), Match("concept", concept.name))

    def add_concept(self, concept: Concept) -> None:
        self.add_concepts([concept])

    @staticmethod
    def _check_acyclic(staged: dict[str, Concept]) -> None:
        state: dict[str, int] = {}

        def visit(name: str) -> None:
            mark = state.get(name, 0)
            if mark == 1:
                raise ModelError(f"cycle in concept hierarchy at '{name}'")
            if mark == 2:
                return
            state[name] = 1
            for parent in staged[name].parents:
                visit(parent)
            state[name] = 2

        for name in staged:
            visit(name)

    def resolve_concept(self, name: str) -> Concept:
        canonical = self._concepts_folded.get(fold(name))
        if canonical is None:
            raise UnknownIdError(f"unknown concept '{name}'")
        return self.concepts[canonical]

    def has_concept(self, name: str) -> bool:
        return fold(name) in self._concepts_folded

    def ancestors(self, name: str) -> set[str]:
        """Reflexive transitive closure of the parent relation."""
        concept = self.resolve_concept(name)
        out = {concept.name}
        stack = list(concept.parents)
        while stack:
            parent = stack.pop()
            if parent not in out:
                out.add(parent)
                stack.extend(self.concepts[parent].parents)
        return out

    def is_subtype(self, sub: str, sup: str) -> bool:
        return self.resolve_concept(sup).name in self.ancestors(sub)

    def add_property(self, prop: PropertyDef) -> PropertyDef:
        domain = self.resolve_concept(prop.domain).name
        rng = prop.range
        if rng != VALUE:
            rng = self.resolve_concept(rng).name
        prop = replace(prop, domain=domain, range=rng)
        if prop.identity in self.properties:
            return self.properties[prop.identity]
        self.properties[prop.identity] = prop
        self._props_by_name.setdefault(fold(prop.name), []).append(prop)
        self._props_by_domain.setdefault(domain, []).append(prop)
        self._index(surface_key(prop.name), Match("property", prop.identity))
        return prop

    def properties_of(self, concept: str) -> list[PropertyDef]:
        """Properties whose domain covers the concept, in declaration
        order, starting from the concept's own."""
        out: list[PropertyDef] = []
        seen: set[str] = set()
        order = [self.resolve_concept(concept).name]
        order += sorted(self.ancestors(concept) - {order[0]})
        for name in order:
            for prop in self._props_by_domain.get(name, []):
                if prop.identity not in seen:
                    seen.add(prop.identity)
                    out.append(prop)
        return out

    def resolve_property(self, ref: str, domain: str | None = None) -> PropertyDef:
        """Resolve a property by identity or bare name; ``domain``
        narrows bare-name hits to properties applicable to it."""
        if ref in self.properties:
            return self.properties[ref]
        candidates = self._props_by_name.get(fold(ref), [])
        if domain is not None:
            types = self.ancestors(domain)
            scoped = [p for p in candidates if p.domain in types]
            if scoped:
                candidates = scoped
        if not candidates:
            raise UnknownIdError(f"unknown property '{ref}'")
        return candidates[0]

    # ------------------------------------------------------------------
    # synonyms and surface lookup

    def _index(self, key: tuple[str, ...], match: Match) -> None:
        if key:
            self._lexicon.setdefault(key, set()).add(match)

    def add_synonym(self, surface: str, target: Match) -> None:
        """Bind a surface word sequence to a model element.

        Adding a synonym only ever adds matches; existing bindings for
        the same surface are kept (lookup returns the full set)."""
        key = surface_key(surface)
        if not key:
            raise ModelError("synonym surface must be non-empty")
        self._check_target(target)
        if (surface, target) not in self.synonyms:
            self.synonyms.append((surface, target))
        self._index(key, target)

    def _check_target(self, target: Match) -> None:
        if target.kind == "concept":
            self.resolve_concept(target.key)
        elif target.kind == "property":
            if target.key not in self.properties:
                raise UnknownIdError(f"unknown property '{target.key}'")
        elif target.kind == "instance":
            if target.key not in self.instances:
                raise UnknownIdError(f"unknown instance '{target.key}'")
        else:
            raise ModelError(f"bad synonym target kind '{target.kind}'")

    def lookup_surface(self, words) -> frozenset[Match]:
        """Every model element whose name or synonym equals the word
        sequence exactly; empty set when nothing matches."""
        return frozenset(self._lexicon.get(surface_key(words), ()))

    def max_term_words(self) -> int:
        return max((len(k) for k in self._lexicon), default=1)

    # ------------------------------------------------------------------
    # instances and fresh ids

    def add_instance(self, instance: Instance) -> Instance:
        if instance.id in self.instances:
            raise ModelError(f"duplicate instance id '{instance.id}'")
        concept = self.resolve_concept(instance.concept).name
        instance = Instance(instance.id, concept, instance.label, instance.description)
        self.instances[instance.id] = instance
        self._reserved_ids.add(instance.id)
        self._seed_counter(instance.id)
        self._index(surface_key(instance.id), Match("instance", instance.id))
        if instance.label:
            self._index(surface_key(instance.label), Match("instance", instance.id))
        return instance

    def get_instance(self, instance_id: str) -> Instance:
        inst = self.instances.get(instance_id)
        if inst is None:
            raise UnknownIdError(f"unknown instance '{instance_id}'")
        return inst

    def set_label(self, instance_id: str, label: str) -> None:
        inst = self.get_instance(instance_id)
        inst.label = label
        self._index(surface_key(label), Match("instance", inst.id))

    def _seed_counter(self, instance_id: str) -> None:
        m = _ID_SHAPE.fullmatch(instance_id)
        if m:
            prefix, num = fold(m.group(1)), int(m.group(2))
            if num > self._counters.get(prefix, 0):
                self._counters[prefix] = num

    @staticmethod
    def id_prefix(concept: str) -> str:
        # first letter of each word: "suspect sighting" -> "ss"
        return "".join(w[0] for w in fold(concept).split() if w)

    def fresh_id(self, concept: str) -> str:
        """Next unused id for the concept; never reissued."""
        prefix = self.id_prefix(self.resolve_concept(concept).name)
        n = self._counters.get(prefix, 0)
        while True:
            n += 1
            candidate = f"{prefix}{n}"
            if candidate not in self._reserved_ids:
                break
        self._counters[prefix] = n
        self._reserved_ids.add(candidate)
        return candidate

    def instance_types(self, instance_id: str) -> set[str]:
        """All concepts the instance belongs to, up to subtype closure."""
        inst = self.get_instance(instance_id)
        types = set(self.ancestors(inst.concept))
        for extra in self._extra_types.get(instance_id, []):
            types |= self.ancestors(extra)
        return types

    def covers(self, domain: str, instance_id: str) -> bool:
        return self.resolve_concept(domain).name in self.instance_types(instance_id)

    # ------------------------------------------------------------------
    # facts

    def _next_fact_id(self) -> str:
        self._fact_seq += 1
        return f"f{self._fact_seq}"

    def assert_fact(
        self,
        subject: str,
        prop: PropertyDef | str,
        obj: str,
        provenance: Provenance | None = None,
        fact_id: str | None = None,
    ) -> Fact:
        """Store a fact after model validation.

        Idempotent on exact duplicate triples: the existing fact is
        returned and nothing changes."""
        inst = self.get_instance(subject)
        if isinstance(prop, str) and prop == IS_A:
            concept = self.resolve_concept(obj).name
            triple = (subject, IS_A, concept)
            existing = self._facts_by_triple.get(triple)
            if existing is not None:
                return existing
            fact = self._store(triple, provenance, fact_id)
            if concept not in self.instance_types(subject):
                self._extra_types.setdefault(subject, []).append(concept)
            return fact

        pdef = prop if isinstance(prop, PropertyDef) else self.resolve_property(prop, inst.concept)
        if not self.covers(pdef.domain, subject):
            raise ModelError(
                f"property '{pdef.name}' has domain {pdef.domain}, which does not "
                f"cover {subject} ({inst.concept})"
            )
        if pdef.is_attribute:
            obj_key = obj
        else:
            target = self.get_instance(obj)
            if not self.covers(pdef.range, obj):
                raise ModelError(
                    f"property '{pdef.name}' expects a {pdef.range}, got "
                    f"{obj} ({target.concept})"
                )
            obj_key = target.id
        triple = (subject, pdef.identity, obj_key)
        existing = self._facts_by_triple.get(triple)
        if existing is not None:
            return existing
        fact = self._store(triple, provenance, fact_id)
        if pdef.name == "description" and inst.description is None:
            inst.description = obj_key
        return fact

    def _store(self, triple, provenance, fact_id) -> Fact:
        fid = fact_id or self._next_fact_id()
        if fid in self._facts_by_id:
            raise ModelError(f"duplicate fact id '{fid}'")
        m = re.fullmatch(r"f(\d+)", fid)
        if m:
            self._fact_seq = max(self._fact_seq, int(m.group(1)))
        fact = Fact(fid, *triple, provenance=provenance)
        self.facts.append(fact)
        self._facts_by_id[fid] = fact
        self._facts_by_triple[triple] = fact
        return fact

    def get_fact(self, fact_id: str) -> Fact:
        fact = self._facts_by_id.get(fact_id)
        if fact is None:
            raise UnknownIdError(f"unknown fact '{fact_id}'")
        return fact

    def has_triple(self, subject: str, prop: str, obj: str) -> bool:
        return (subject, prop, obj) in self._facts_by_triple

    def query(self, pattern: Pattern) -> list[Fact]:
        """Facts matching every bound pattern element, in assertion
        order.  Subject concept constraints match up to subtype, as do
        the objects of is-a facts."""
        if pattern.subject is not None:
            self.get_instance(pattern.subject)
        if pattern.concept is not None:
            self.resolve_concept(pattern.concept)
        return [fact for fact in self.facts if self.fact_matches(fact, pattern)]

    def fact_matches(self, fact: Fact, pattern: Pattern) -> bool:
        if pattern.subject is not None and fact.subject != pattern.subject:
            return False
        if pattern.concept is not None:
            if self.resolve_concept(pattern.concept).name not in self.instance_types(fact.subject):
                return False
        if pattern.property is not None and not self._property_matches(fact, pattern.property):
            return False
        if pattern.object is not None and not self._object_matches(fact, pattern.object):
            return False
        return True

    def _property_matches(self, fact: Fact, ref: str) -> bool:
        if fact.property == ref:
            return True
        if fact.property == IS_A:
            return fold(ref) == IS_A
        pdef = self.properties.get(fact.property)
        return pdef is not None and fold(pdef.name) == fold(ref)

    def _object_matches(self, fact: Fact, obj: str) -> bool:
        if fact.object == obj:
            return True
        if fact.property == IS_A and self.has_concept(obj):
            # "is a vehicle" matches is-a facts about any vehicle subtype
            return self.resolve_concept(obj).name in self.ancestors(fact.object)
        return False

    def facts_about(self, instance_id: str) -> list[Fact]:
        return self.query(Pattern(subject=instance_id))

    def snapshot_triples(self) -> frozenset[tuple[str, str, str]]:
        return frozenset(self._facts_by_triple)


# ----------------------------------------------------------------------
# binding CE statements and model declarations to a KB


def apply_model_decls(kb: KnowledgeBase, decls: list[ce.CeModelDecl]) -> None:
    """Apply parsed model declarations, tolerating forward references
    between concepts within the batch."""
    batch = []
    for decl in decls:
        if isinstance(decl, ce.Conceptualise) and decl.declares:
            batch.append(Concept(decl.name, tuple(decl.parents)))
    if batch:
        kb.add_concepts(batch)
    for decl in decls:
        if isinstance(decl, ce.Conceptualise):
            domain = kb.resolve_concept(decl.name).name
            for pd in decl.properties:
                rng = pd.range if pd.range == VALUE else kb.resolve_concept(pd.range).name
                kb.add_property(PropertyDef(domain, pd.name, rng, pd.verb_phrase))
        elif isinstance(decl, ce.StaticInstance):
            if decl.id not in kb.instances:
                kb.add_instance(Instance(decl.id, decl.concept))
        elif isinstance(decl, ce.SynonymDecl):
            target = _synonym_target(kb, decl)
            for surface in decl.surfaces:
                kb.add_synonym(surface, target)
        else:
            raise ModelError(f"unsupported model declaration {decl!r}")


def _synonym_target(kb: KnowledgeBase, decl: ce.SynonymDecl) -> Match:
    if decl.target_kind == "concept":
        return Match("concept", kb.resolve_concept(decl.target).name)
    if decl.target_kind == "property":
        domain, name, rng = decl.target.split(":")
        pdef = kb.resolve_property(f"{kb.resolve_concept(domain).name}:{name}:{rng}")
        return Match("property", pdef.identity)
    return Match("instance", kb.get_instance(decl.target).id)


def assert_statement(
    kb: KnowledgeBase, stmt: ce.CeStatement, provenance: Provenance | None = None
) -> list[Fact]:
    """Assert one parsed CE statement, creating instances as needed.

    "there is a ... named x" with an existing x layers new facts (and,
    when the stated concept is new for x, an is-a fact) onto it."""
    if isinstance(stmt, ce.Because):
        raise ModelError("a because-statement cannot be asserted")
    concept = kb.resolve_concept(stmt.concept).name
    created: list[Fact] = []
    if stmt.id in kb.instances:
        if concept not in kb.instance_types(stmt.id):
            created.append(kb.assert_fact(stmt.id, IS_A, concept, provenance))
    else:
        kb.add_instance(Instance(stmt.id, concept))
    for clause in stmt.clauses:
        if isinstance(clause, ce.KnownAs):
            kb.set_label(stmt.id, clause.label)
        elif isinstance(clause, ce.IsA):
            created.append(kb.assert_fact(stmt.id, IS_A, clause.concept, provenance))
        else:
            value = clause.value
            if isinstance(value, ce.InstanceRef):
                if value.id not in kb.instances:
                    kb.add_instance(Instance(value.id, value.concept))
                obj = value.id
            else:
                obj = value
            pdef = kb.resolve_property(clause.name, kb.get_instance(stmt.id).concept)
            created.append(kb.assert_fact(stmt.id, pdef, obj, provenance))
    return created


def validate_statement(kb: KnowledgeBase, stmt: ce.CeStatement) -> None:
    """Check a statement against the model without asserting it.

    Mirrors assert_statement's checks: concepts and properties must
    resolve, domains must cover subjects (allowing for instances the
    statement itself creates or re-types) and relation objects must fit
    their range."""
    if isinstance(stmt, ce.Because):
        for embedded in stmt.statements:
            validate_statement(kb, embedded)
        return
    concept = kb.resolve_concept(stmt.concept).name
    if stmt.id in kb.instances:
        types = set(kb.instance_types(stmt.id)) | kb.ancestors(concept)
    else:
        types = set(kb.ancestors(concept))
    for clause in stmt.clauses:
        if isinstance(clause, ce.IsA):
            types |= kb.ancestors(clause.concept)
    for clause in stmt.clauses:
        if isinstance(clause, (ce.IsA, ce.KnownAs)):
            continue
        pdef = kb.resolve_property(clause.name, concept)
        if pdef.domain not in types:
            raise ModelError(
                f"property '{pdef.name}' has domain {pdef.domain}, which does not "
                f"cover {stmt.id}"
            )
        value = clause.value
        if pdef.is_attribute:
            if isinstance(value, ce.InstanceRef):
                raise ModelError(f"property '{pdef.name}' takes a literal value")
        else:
            if not isinstance(value, ce.InstanceRef):
                raise ModelError(f"property '{pdef.name}' takes a {pdef.range}")
            if value.id in kb.instances:
                if pdef.range not in kb.instance_types(value.id):
                    raise ModelError(
                        f"property '{pdef.name}' expects a {pdef.range}, got "
                        f"{value.id}"
                    )
            elif pdef.range not in kb.ancestors(kb.resolve_concept(value.concept).name):
                raise ModelError(
                    f"property '{pdef.name}' expects a {pdef.range}, got a "
                    f"{value.concept}"
                )


def load_ce(kb: KnowledgeBase, text: str, provenance: Provenance | None = None) -> list[Fact]:
    """Load mixed CE text: model declarations and ground statements."""
    sentences = ce.split_sentences(text)
    decls: list[ce.CeModelDecl] = []
    statements: list[ce.CeStatement] = []
    for sentence in sentences:
        if ce.is_model_decl(sentence.text):
            decls.append(ce.parse_model_sentence(sentence))
        else:
            statements.append(ce.parse_statement_sentence(sentence))
    apply_model_decls(kb, decls)
    created: list[Fact] = []
    for stmt in statements:
        created += assert_statement(kb, stmt, provenance)
    return created


# ----------------------------------------------------------------------
# rendering facts back to CE statements


def fact_clause(kb: KnowledgeBase, fact: Fact) -> ce.Clause:
    if fact.property == IS_A:
        return ce.IsA(fact.object)
    pdef = kb.properties[fact.property]
    if pdef.is_attribute:
        return ce.PropertyClause(pdef.name, fact.object, verb_phrase=pdef.verb_phrase)
    target = kb.get_instance(fact.object)
    ref = ce.InstanceRef(target.concept, target.id)
    return ce.PropertyClause(pdef.name, ref, verb_phrase=pdef.verb_phrase)


def facts_to_statements(
    kb: KnowledgeBase,
    facts: list[Fact],
    introduced: set[str] | None = None,
    merge: bool = True,
) -> list[ce.CeStatement]:
    """Render facts as CE statements.

    The first mention of a subject introduces it ("there is a ... named
    ...") carrying its label; later mentions use the short form.  With
    ``merge`` false every fact becomes its own statement, which keeps a
    one-to-one pairing with provenance."""
    introduced = set() if introduced is None else introduced
    statements: list[ce.CeStatement] = []
    for fact in facts:
        clause = fact_clause(kb, fact)
        if merge and statements:
            last = statements[-1]
            if last.id == fact.subject and isinstance(last, ce.NewInstance):
                statements[-1] = replace(last, clauses=last.clauses + (clause,))
                continue
            if last.id == fact.subject and isinstance(last, ce.InstanceFacts):
                statements[-1] = replace(last, clauses=last.clauses + (clause,))
                continue
        inst = kb.get_instance(fact.subject)
        if fact.subject not in introduced:
            introduced.add(fact.subject)
            clauses: tuple[ce.Clause, ...] = ()
            if inst.label:
                clauses += (ce.KnownAs(inst.label),)
            statements.append(ce.NewInstance(inst.concept, inst.id, clauses + (clause,)))
        else:
            statements.append(ce.InstanceFacts(inst.concept, inst.id, (clause,)))
    return statements
