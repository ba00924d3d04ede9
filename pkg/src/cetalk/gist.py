"""Friendlier renderings of CE: gist text and icon segments.

Gisting is template-driven.  A template triggers on a concept, fills
``{property name}`` slots from the statements about the triggering
instance, and may attach icon-keyed segments for compact displays.
Role context selects between templates (which is how information is
withheld from some audiences: the patrol template simply has no suspect
slot), device context decides whether segments are produced, and when
no template matches the gist falls back to the canonical CE text, so
gisting is total.

Expansion is exact: every gist keeps a back-reference to the CE it was
rendered from, stored verbatim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import ce
from .kernel import CeError, UnknownIdError, fold

_SLOT = re.compile(r"\{([^{}]+)\}")

SEGMENT_DEVICES = frozenset({"eyeline", "glass", "watch"})


class GistError(CeError):
    pass


@dataclass(frozen=True)
class GistTemplate:
    name: str
    trigger: str
    pattern: str
    optional: frozenset[str] = frozenset()
    role: str | None = None
    icons: tuple[tuple[str, str], ...] = ()  # (slot, icon key)

    def slots(self) -> list[str]:
        return [m.group(1).strip() for m in _SLOT.finditer(self.pattern)]


@dataclass(frozen=True)
class GistDescriptor:
    text: str
    segments: tuple[tuple[str, str], ...] = ()  # (icon key, caption)
    source_ids: tuple[str, ...] = ()
    template: str | None = None


class GistStore:
    """Content-addressed store of the CE behind each gist, so equal CE
    always yields the same gist id and expansion is byte-exact."""

    def __init__(self) -> None:
        self._by_id: dict[str, str] = {}
        self._by_text: dict[str, str] = {}
        self._seq = 0

    def register(self, ce_text: str) -> str:
        existing = self._by_text.get(ce_text)
        if existing is not None:
            return existing
        self._seq += 1
        gist_id = f"g{self._seq}"
        self._by_id[gist_id] = ce_text
        self._by_text[ce_text] = gist_id
        return gist_id

    def ce_text(self, gist_id: str) -> str:
        text = self._by_id.get(gist_id)
        if text is None:
            raise UnknownIdError(f"unknown gist '{gist_id}'")
        return text


@dataclass(frozen=True)
class GistContext:
    role: str | None = None
    device: str = "phone"


# ----------------------------------------------------------------------
# template files


def parse_templates(text: str) -> list[GistTemplate]:
    """Parse a template file: blocks of ``template <name>`` headers with
    trigger/role/icon/text/optional lines; ``#`` starts a comment."""
    templates: list[GistTemplate] = []
    current: dict | None = None

    def flush() -> None:
        nonlocal current
        if current is None:
            return
        if "trigger" not in current or "pattern" not in current:
            raise GistError(f"template '{current['name']}' needs trigger: and text:")
        templates.append(
            GistTemplate(
                name=current["name"],
                trigger=current["trigger"],
                pattern=current["pattern"],
                optional=frozenset(current.get("optional", ())),
                role=current.get("role"),
                icons=tuple(current.get("icons", ())),
            )
        )
        current = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.startswith("template "):
            flush()
            current = {"name": line[len("template ") :].strip(), "icons": []}
            continue
        if current is None:
            raise GistError(f"line {lineno}: content outside a template block")
        if ":" not in line:
            raise GistError(f"line {lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        key, value = key.strip(), value.strip()
        if key == "trigger":
            current["trigger"] = value
        elif key == "role":
            current["role"] = value
        elif key == "text":
            current["pattern"] = value
        elif key == "optional":
            current["optional"] = [s.strip() for s in value.split(",") if s.strip()]
        elif key == "icon":
            slot, _, icon = value.partition("=")
            current["icons"].append((slot.strip(), icon.strip()))
        else:
            raise GistError(f"line {lineno}: unknown template key '{key}'")
    flush()
    return templates


# ----------------------------------------------------------------------
# rendering


def _slot_values(statements, subject_id: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for stmt in statements:
        if isinstance(stmt, ce.Because) or stmt.id != subject_id:
            continue
        for clause in stmt.clauses:
            if isinstance(clause, ce.PropertyClause):
                value = clause.value
                text = value.id if isinstance(value, ce.InstanceRef) else value
                values.setdefault(fold(clause.name), text)
    return values


def _trigger_subject(statements, trigger: str) -> str | None:
    want = fold(trigger)
    for stmt in statements:
        if isinstance(stmt, ce.Because):
            continue
        if fold(stmt.concept) == want:
            return stmt.id
        if any(isinstance(c, ce.IsA) and fold(c.concept) == want for c in stmt.clauses):
            return stmt.id
    return None


def _fill(template: GistTemplate, values: dict[str, str]) -> str | None:
    missing_required = False

    def repl(m) -> str:
        nonlocal missing_required
        slot = m.group(1).strip()
        value = values.get(fold(slot))
        if value is None:
            if slot not in template.optional:
                missing_required = True
            return ""
        return value

    text = _SLOT.sub(repl, template.pattern)
    if missing_required:
        return None
    return re.sub(r"\s+", " ", text).strip()


def gist(
    statements,
    templates: list[GistTemplate],
    context: GistContext | None = None,
    store: GistStore | None = None,
) -> GistDescriptor:
    """Render statements as a gist descriptor.

    The first template (in file order, exact-role matches first) whose
    trigger resolves and whose required slots all fill wins; otherwise
    the canonical CE text is the gist."""
    context = context or GistContext()
    statements = list(statements)
    ce_text = ce.render_statements(statements)
    source_ids = (store.register(ce_text),) if store is not None else ()
    candidates = [t for t in templates if t.role is None or t.role == context.role]
    candidates.sort(key=lambda t: t.role != context.role)
    for template in candidates:
        subject = _trigger_subject(statements, template.trigger)
        if subject is None:
            continue
        values = _slot_values(statements, subject)
        text = _fill(template, values)
        if text is None:
            continue
        segments: tuple[tuple[str, str], ...] = ()
        if context.device in SEGMENT_DEVICES:
            segments = tuple(
                (icon, values[fold(slot)])
                for slot, icon in template.icons
                if fold(slot) in values
            )
        return GistDescriptor(text, segments, source_ids, template.name)
    return GistDescriptor(ce_text, (), source_ids, None)


def expand(gist_id: str, store: GistStore) -> list[ce.CeStatement]:
    """The exact CE statements a gist was rendered from."""
    return ce.parse_statements(store.ce_text(gist_id))
