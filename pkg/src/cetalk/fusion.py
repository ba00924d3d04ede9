"""Forward-chaining fusion over the knowledge base.

Rules are condition/production fact patterns written in a CE-adjacent
block syntax; running them to fixpoint produces inferred facts that
carry their rule and premise facts as provenance, which is what the
why/because rationale is rendered from.

Rule file format (UTF-8, ``--`` comments)::

    rule suspect sighting
    if:
      the person ?P is a suspect
      the vehicle ?V has ?R as registration
    then:
      there is a suspect sighting named SS_?V that ...

``?X`` names are variables shared across patterns; ids in productions
may splice bindings (``SS_?V`` becomes ``SS_v48``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import ce
from .kernel import (
    IS_A,
    CeError,
    Fact,
    Inferred,
    KnowledgeBase,
    Pattern,
    Told,
    UnknownIdError,
    facts_to_statements,
    assert_statement,
    fold,
)


class FusionError(CeError):
    """Bad rule definition or a run that failed its guards."""


_VAR = re.compile(r"\?[A-Za-z][A-Za-z0-9_]*")


def _is_var(text: str) -> bool:
    return text.startswith("?")


def _vars_in(text: str) -> set[str]:
    return set(_VAR.findall(text))


@dataclass(frozen=True)
class FactPattern:
    """One condition: subject/concept/property/object, any of which may
    be a ?variable (subject and object) or a constant."""

    subject: str
    concept: str | None
    property: str  # bare property name, or the is-a marker
    object: str

    def variables(self) -> set[str]:
        out = set()
        if _is_var(self.subject):
            out.add(self.subject)
        if _is_var(self.object):
            out.add(self.object)
        return out


@dataclass(frozen=True)
class Rule:
    name: str
    conditions: tuple[FactPattern, ...]
    productions: tuple[ce.CeStatement, ...]
    priority: int = 0


# ----------------------------------------------------------------------
# rule files


def parse_rules(text: str) -> list[Rule]:
    """Parse a rule file into Rule objects, in file order."""
    rules: list[Rule] = []
    name = None
    priority = 0
    section = None
    conditions: list[FactPattern] = []
    productions: list[ce.CeStatement] = []

    def flush() -> None:
        nonlocal name, priority, conditions, productions, section
        if name is None:
            return
        if not conditions or not productions:
            raise FusionError(f"rule '{name}' needs both if: and then: sections")
        rule = Rule(name, tuple(conditions), tuple(productions), priority)
        _check_bound(rule)
        rules.append(rule)
        name, priority, section = None, 0, None
        conditions, productions = [], []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("--", 1)[0].strip()
        if not line:
            continue
        if line.startswith("rule "):
            flush()
            name = line[len("rule ") :].strip()
            continue
        if line.startswith("priority"):
            priority = int(line.split()[-1])
            continue
        if line in ("if:", "then:"):
            section = line[:-1]
            continue
        if name is None or section is None:
            raise FusionError(f"unexpected line {lineno} outside a rule block: {line!r}")
        sentence = line if line.endswith(".") else line + "."
        if section == "if":
            conditions.extend(_patterns_from_line(sentence, lineno))
        else:
            try:
                productions.append(ce.parse_statement(sentence))
            except ce.CeSyntaxError as err:
                raise FusionError(f"rule '{name}' line {lineno}: {err}") from err
    flush()
    return rules


def _patterns_from_line(sentence: str, lineno: int) -> list[FactPattern]:
    try:
        stmt = ce.parse_statement(sentence)
    except ce.CeSyntaxError as err:
        raise FusionError(f"bad pattern on line {lineno}: {err}") from err
    if isinstance(stmt, ce.Because):
        raise FusionError(f"line {lineno}: because-statements cannot be patterns")
    out = []
    for clause in stmt.clauses:
        if isinstance(clause, ce.IsA):
            out.append(FactPattern(stmt.id, stmt.concept, IS_A, clause.concept))
        elif isinstance(clause, ce.KnownAs):
            raise FusionError(f"line {lineno}: 'is known as' cannot be a pattern")
        else:
            value = clause.value
            obj = value.id if isinstance(value, ce.InstanceRef) else value
            out.append(FactPattern(stmt.id, stmt.concept, clause.name, obj))
    if not out:
        raise FusionError(f"line {lineno}: pattern line has no clauses")
    return out


def _check_bound(rule: Rule) -> None:
    bound = set()
    for cond in rule.conditions:
        bound |= cond.variables()
    for stmt in rule.productions:
        loose = _production_vars(stmt) - bound
        if loose:
            raise FusionError(
                f"rule '{rule.name}' uses unbound variables {sorted(loose)}"
            )


def _production_vars(stmt: ce.CeStatement) -> set[str]:
    if isinstance(stmt, ce.Because):
        raise FusionError("because-statements cannot be productions")
    out = _vars_in(stmt.id)
    for clause in stmt.clauses:
        if isinstance(clause, ce.PropertyClause):
            value = clause.value
            out |= _vars_in(value.id if isinstance(value, ce.InstanceRef) else value)
    return out


def validate_rules(rules: list[Rule], kb: KnowledgeBase) -> None:
    """Check rule references against the loaded model."""
    for rule in rules:
        for cond in rule.conditions:
            if cond.concept is not None:
                kb.resolve_concept(cond.concept)
            if cond.property != IS_A:
                kb.resolve_property(cond.property, cond.concept)
            elif not _is_var(cond.object):
                kb.resolve_concept(cond.object)
        for stmt in rule.productions:
            kb.resolve_concept(stmt.concept)
            for clause in stmt.clauses:
                if isinstance(clause, ce.IsA):
                    kb.resolve_concept(clause.concept)
                elif isinstance(clause, ce.PropertyClause):
                    kb.resolve_property(clause.name, stmt.concept)


# ----------------------------------------------------------------------
# matching and firing

Binding = dict[str, str]


def _unify(kb: KnowledgeBase, cond: FactPattern, fact: Fact, binding: Binding) -> Binding | None:
    out = dict(binding)
    subject = out.get(cond.subject, cond.subject) if _is_var(cond.subject) else cond.subject
    if _is_var(subject):
        out[cond.subject] = fact.subject
    elif subject != fact.subject:
        return None
    if cond.concept is not None:
        if kb.resolve_concept(cond.concept).name not in kb.instance_types(fact.subject):
            return None
    if cond.property == IS_A:
        if fact.property != IS_A:
            return None
    else:
        if fact.property == IS_A:
            return None
        pdef = kb.properties.get(fact.property)
        if pdef is None or fold(pdef.name) != fold(cond.property):
            return None
    obj = out.get(cond.object, cond.object) if _is_var(cond.object) else cond.object
    if _is_var(obj):
        out[cond.object] = fact.object
    elif cond.property == IS_A:
        # concept constants in is-a patterns match up to subtype
        if kb.resolve_concept(obj).name not in kb.ancestors(fact.object):
            return None
    elif obj != fact.object:
        return None
    return out


def find_bindings(kb: KnowledgeBase, conditions) -> list[tuple[Binding, list[Fact]]]:
    """All variable bindings satisfying the conjunction, brute force."""
    results: list[tuple[Binding, list[Fact]]] = [({}, [])]
    for cond in conditions:
        step: list[tuple[Binding, list[Fact]]] = []
        for binding, premises in results:
            for fact in kb.facts:
                extended = _unify(kb, cond, fact, binding)
                if extended is not None:
                    step.append((extended, premises + [fact]))
        results = step
        if not results:
            break
    return results


def _substitute(text: str, binding: Binding) -> str:
    def repl(m):
        var = m.group(0)
        if var not in binding:
            raise FusionError(f"unbound variable {var}")
        return binding[var]

    return _VAR.sub(repl, text)


def _instantiate(stmt: ce.CeStatement, binding: Binding) -> ce.CeStatement:
    clauses = []
    for clause in stmt.clauses:
        if isinstance(clause, ce.PropertyClause):
            value = clause.value
            if isinstance(value, ce.InstanceRef):
                value = ce.InstanceRef(value.concept, _substitute(value.id, binding))
            else:
                value = _substitute(value, binding)
            clauses.append(ce.PropertyClause(clause.name, value, clause.verb_phrase))
        else:
            clauses.append(clause)
    cls = type(stmt)
    return cls(stmt.concept, _substitute(stmt.id, binding), tuple(clauses))


@dataclass
class RunResult:
    new_facts: list[Fact] = field(default_factory=list)
    iterations: int = 0


def run_rules(
    kb: KnowledgeBase, rules: list[Rule], max_iterations: int = 100
) -> RunResult:
    """Fire rules to fixpoint.

    Each inferred fact carries Inferred provenance naming the rule and
    the premise facts of its binding; duplicate triples are never
    re-added, so a second run is a no-op.  The iteration cap is a guard
    against unexpectedly recursive rule sets."""
    validate_rules(rules, kb)
    ordered = sorted(enumerate(rules), key=lambda it: (-it[1].priority, it[0]))
    result = RunResult()
    known = {f.id for f in kb.facts}
    for _ in range(max_iterations):
        result.iterations += 1
        added = False
        for _, rule in ordered:
            for binding, premises in find_bindings(kb, rule.conditions):
                provenance = Inferred(rule.name, tuple(f.id for f in premises))
                for template in rule.productions:
                    stmt = _instantiate(template, binding)
                    for fact in assert_statement(kb, stmt, provenance):
                        if fact.id not in known:
                            known.add(fact.id)
                            result.new_facts.append(fact)
                            added = True
        if not added:
            audit_soundness(kb, rules)
            return result
    raise FusionError(
        f"rule firing did not reach a fixpoint within {max_iterations} iterations"
    )


def audit_soundness(kb: KnowledgeBase, rules: list[Rule]) -> None:
    """Re-check every inferred fact in the KB: its premises must exist,
    satisfy its rule's conditions pairwise, and its rule's productions
    must regenerate it."""
    by_name = {rule.name: rule for rule in rules}
    for fact in kb.facts:
        prov = fact.provenance
        if not isinstance(prov, Inferred):
            continue
        rule = by_name.get(prov.rule)
        if rule is None:
            continue  # inferred by a rule set not under audit
        premises = [kb.get_fact(pid) for pid in prov.premises]
        if len(premises) != len(rule.conditions):
            raise FusionError(f"fact {fact.id}: premise arity mismatch for {rule.name}")
        binding: Binding | None = {}
        for cond, premise in zip(rule.conditions, premises):
            binding = _unify(kb, cond, premise, binding)
            if binding is None:
                raise FusionError(
                    f"fact {fact.id}: premises no longer satisfy rule '{rule.name}'"
                )
        produced = set()
        for template in rule.productions:
            stmt = _instantiate(template, binding)
            subject = stmt.id
            for clause in stmt.clauses:
                if isinstance(clause, ce.IsA):
                    produced.add((subject, IS_A, clause.concept))
                elif isinstance(clause, ce.PropertyClause):
                    value = clause.value
                    obj = value.id if isinstance(value, ce.InstanceRef) else value
                    pdef = kb.resolve_property(clause.name, stmt.concept)
                    produced.add((subject, pdef.identity, obj))
        if fact.triple not in produced:
            raise FusionError(
                f"fact {fact.id} is not regenerated by its rule '{rule.name}'"
            )


# ----------------------------------------------------------------------
# rationale


@dataclass(frozen=True)
class Rationale:
    conclusion: str
    rule: str | None
    premises: tuple[str, ...]
    because: ce.Because

    @property
    def text(self) -> str:
        return ce.render_statement(self.because)


def rationale(kb: KnowledgeBase, ref: str) -> Rationale:
    """Why a fact (or a derived instance) holds.

    Inferred facts answer with their premises conjoined into a
    because-statement; told facts cite their source and time."""
    if ref in kb.instances:
        facts = [f for f in kb.facts_about(ref) if isinstance(f.provenance, Inferred)]
        if facts:
            return _inferred_rationale(kb, facts)
        facts = kb.facts_about(ref)
        if not facts:
            raise UnknownIdError(f"nothing is known about '{ref}'")
        return _told_rationale(kb, facts[0])
    fact = kb.get_fact(ref)
    if isinstance(fact.provenance, Inferred):
        return _inferred_rationale(kb, [fact])
    return _told_rationale(kb, fact)


def _inferred_rationale(kb: KnowledgeBase, facts: list[Fact]) -> Rationale:
    premise_ids: list[str] = []
    for fact in facts:
        for pid in fact.provenance.premises:
            if pid not in premise_ids:
                premise_ids.append(pid)
    premises = [kb.get_fact(pid) for pid in premise_ids]
    because = ce.Because(tuple(facts_to_statements(kb, premises, merge=False)))
    return Rationale(
        conclusion=facts[0].id,
        rule=facts[0].provenance.rule,
        premises=tuple(premise_ids),
        because=because,
    )


def _told_rationale(kb: KnowledgeBase, fact: Fact) -> Rationale:
    prov = fact.provenance
    source = prov.source if isinstance(prov, Told) else "unknown"
    timestamp = prov.timestamp if isinstance(prov, Told) else None
    statements = facts_to_statements(kb, [fact], merge=False)
    because = ce.Because(tuple(statements), source=source, timestamp=timestamp)
    return Rationale(fact.id, None, (), because)


# ----------------------------------------------------------------------
# subscriptions


@dataclass(frozen=True)
class Subscription:
    id: str
    pattern: Pattern
    subscriber: str


class SubscriptionManager:
    """Deliver facts matching subscribed patterns.

    New-fact deliveries happen after a rule run commits, in
    subscription-creation order; subscribing also replays existing
    matches immediately."""

    def __init__(self) -> None:
        self._subs: dict[str, Subscription] = {}
        self._seq = 0

    def subscribe(
        self, kb: KnowledgeBase, pattern: Pattern, subscriber: str
    ) -> tuple[Subscription, list[Fact]]:
        self._seq += 1
        sub = Subscription(f"sub{self._seq}", pattern, subscriber)
        self._subs[sub.id] = sub
        return sub, kb.query(pattern)

    def unsubscribe(self, sub_id: str) -> None:
        self._subs.pop(sub_id, None)

    def deliveries(
        self, kb: KnowledgeBase, new_facts: list[Fact]
    ) -> list[tuple[Subscription, list[Fact]]]:
        out = []
        for sub in self._subs.values():
            matched = [f for f in new_facts if kb.fact_matches(f, sub.pattern)]
            if matched:
                out.append((sub, matched))
        return out
