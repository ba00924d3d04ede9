"""Knowledge-base persistence as canonical CE text.

The store is human-auditable CE: model declarations, instance
introductions, then one fact per line with its provenance in a trailing
comment.  Restoring a persisted KB reproduces the same facts, ids and
provenance.  A corrupted line is a located error and nothing loads.
"""

from __future__ import annotations

import re

from . import ce
from .kernel import (
    IS_A,
    CeError,
    Inferred,
    Instance,
    KnowledgeBase,
    Told,
    apply_model_decls,
    fact_clause,
)


class PersistError(CeError):
    pass


_PROV = re.compile(r"^(f\d+)(?:\s+(told|inferred)\b(.*))?$")
_FIELD = re.compile(r"(\w+)='([^']*)'")


def _provenance_comment(fact) -> str:
    prov = fact.provenance
    if isinstance(prov, Told):
        parts = [f"source='{prov.source}'"]
        if prov.conversation:
            parts.append(f"conv='{prov.conversation}'")
        if prov.timestamp:
            parts.append(f"at='{prov.timestamp}'")
        return f"{fact.id} told " + " ".join(parts)
    if isinstance(prov, Inferred):
        premises = ",".join(prov.premises)
        return f"{fact.id} inferred rule='{prov.rule}' premises='{premises}'"
    return fact.id


def persist_text(kb: KnowledgeBase) -> str:
    """Serialize the whole KB as CE text."""
    lines = ["-- knowledge base snapshot"]
    if kb.concepts:
        lines.append("")
        lines.append("-- concepts")
        props_by_domain: dict[str, list] = {}
        for prop in kb.properties.values():
            props_by_domain.setdefault(prop.domain, []).append(prop)
        for concept in kb.concepts.values():
            decl = ce.Conceptualise(
                concept.name,
                tuple(concept.parents),
                tuple(
                    ce.PropertyDecl(p.name, p.range, p.verb_phrase)
                    for p in props_by_domain.get(concept.name, [])
                ),
            )
            lines.append(ce.render_model_decl(decl))
    if kb.synonyms:
        lines.append("")
        lines.append("-- synonyms")
        grouped: dict[tuple[str, str], list[str]] = {}
        for surface, target in kb.synonyms:
            grouped.setdefault((target.kind, target.key), []).append(surface)
        for (kind, key), surfaces in grouped.items():
            decl = ce.SynonymDecl(kind, key, tuple(surfaces))
            lines.append(ce.render_model_decl(decl))
    if kb.instances:
        lines.append("")
        lines.append("-- instances")
        for inst in kb.instances.values():
            clauses = (ce.KnownAs(inst.label),) if inst.label else ()
            lines.append(
                ce.render_statement(ce.NewInstance(inst.concept, inst.id, clauses))
            )
    if kb.facts:
        lines.append("")
        lines.append("-- facts")
        for fact in kb.facts:
            inst = kb.get_instance(fact.subject)
            stmt = ce.InstanceFacts(inst.concept, inst.id, (fact_clause(kb, fact),))
            lines.append(f"{ce.render_statement(stmt)} -- {_provenance_comment(fact)}")
    return "\n".join(lines) + "\n"


def persist(kb: KnowledgeBase, path) -> None:
    text = persist_text(kb)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def restore_text(text: str) -> KnowledgeBase:
    """Rebuild a KB from persisted CE text.

    The text is parsed in full before anything is applied, so a
    corrupted line loads nothing."""
    sentences = ce.split_sentences(text)
    decls = []
    intros = []
    fact_rows = []
    for sentence in sentences:
        if ce.is_model_decl(sentence.text):
            decls.append(ce.parse_model_sentence(sentence))
            continue
        stmt = ce.parse_statement_sentence(sentence)
        if sentence.comment is not None:
            fact_rows.append((stmt, _parse_provenance(sentence), sentence.line))
        else:
            intros.append((stmt, sentence.line))
    kb = KnowledgeBase()
    apply_model_decls(kb, decls)
    for stmt, line in intros:
        if isinstance(stmt, ce.Because):
            raise PersistError(f"line {line}: because-statements cannot be stored")
        if stmt.id not in kb.instances:
            kb.add_instance(Instance(stmt.id, stmt.concept))
        for clause in stmt.clauses:
            if isinstance(clause, ce.KnownAs):
                kb.set_label(stmt.id, clause.label)
            else:
                raise PersistError(
                    f"line {line}: instance introductions carry only labels"
                )
    for stmt, (fact_id, provenance), line in fact_rows:
        if isinstance(stmt, ce.Because) or len(stmt.clauses) != 1:
            raise PersistError(f"line {line}: expected exactly one fact clause")
        clause = stmt.clauses[0]
        if isinstance(clause, ce.IsA):
            kb.assert_fact(stmt.id, IS_A, clause.concept, provenance, fact_id)
        elif isinstance(clause, ce.KnownAs):
            raise PersistError(f"line {line}: labels belong to instance lines")
        else:
            value = clause.value
            obj = value.id if isinstance(value, ce.InstanceRef) else value
            pdef = kb.resolve_property(clause.name, stmt.concept)
            kb.assert_fact(stmt.id, pdef, obj, provenance, fact_id)
    return kb


def restore(path) -> KnowledgeBase:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        raise PersistError(f"cannot read {path}: {err}") from err
    return restore_text(text)


def _parse_provenance(sentence: ce.SentenceTokens):
    m = _PROV.match(sentence.comment.strip())
    if not m:
        raise PersistError(
            f"line {sentence.line}: bad provenance comment {sentence.comment!r}"
        )
    fact_id, kind, rest = m.group(1), m.group(2), m.group(3) or ""
    if kind is None:
        return fact_id, None
    fields = dict(_FIELD.findall(rest))
    if kind == "told":
        if "source" not in fields:
            raise PersistError(f"line {sentence.line}: told provenance needs a source")
        return fact_id, Told(
            fields["source"], fields.get("conv"), fields.get("at")
        )
    premises = tuple(p for p in fields.get("premises", "").split(",") if p)
    if "rule" not in fields:
        raise PersistError(f"line {sentence.line}: inferred provenance needs a rule")
    return fact_id, Inferred(fields["rule"], premises)


def snapshot(kb: KnowledgeBase) -> dict:
    """A comparable value capturing everything persistence preserves."""
    return {
        "concepts": {n: (tuple(sorted(c.parents)), c.is_entity) for n, c in kb.concepts.items()},
        "properties": dict(kb.properties),
        "synonyms": frozenset(kb.synonyms),
        "instances": {
            i.id: (i.concept, i.label, i.description) for i in kb.instances.values()
        },
        "facts": [(f.id, f.triple, f.provenance) for f in kb.facts],
    }


def kb_equal(a: KnowledgeBase, b: KnowledgeBase) -> bool:
    return snapshot(a) == snapshot(b)
