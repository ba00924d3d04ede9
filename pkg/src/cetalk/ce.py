"""Controlled-English surface language: parsing and rendering.

The grammar covers model declarations (conceptualise, synonym
bindings, static instances) and ground statements ("there is a vehicle
named v48 that has DEF456 as registration and is a moving thing", the
short "the vehicle v48 has ..." form, verb-phrase clauses such as
"requires the intelligence capability localize", and "because ..."
rationale sentences).  The parser is model-free: names are validated
against a knowledge base later, not here.

Files are UTF-8, sentences end with a period, and ``--`` starts a line
comment.  Both quote styles `like this' and 'like this' are accepted;
rendering normalizes to straight single quotes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

VALUE = "value"


class CeSyntaxError(Exception):
    """A located parse error."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


# ----------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class InstanceRef:
    concept: str
    id: str


@dataclass(frozen=True)
class PropertyClause:
    """"has <value> as <name>", "has the <concept> <id> as <name>", or a
    verb-phrase form "<name> the <concept> <id>"."""

    name: str
    value: str | InstanceRef
    verb_phrase: bool = False


@dataclass(frozen=True)
class IsA:
    concept: str


@dataclass(frozen=True)
class KnownAs:
    label: str


Clause = PropertyClause | IsA | KnownAs


@dataclass(frozen=True)
class NewInstance:
    """"there is a <concept> named <id> [that <clauses>]"."""

    concept: str
    id: str
    clauses: tuple[Clause, ...] = ()


@dataclass(frozen=True)
class InstanceFacts:
    """"the <concept> <id> <clauses>"."""

    concept: str
    id: str
    clauses: tuple[Clause, ...] = ()


@dataclass(frozen=True)
class Because:
    """Rationale: embedded premise statements, or a told citation."""

    statements: tuple[NewInstance | InstanceFacts, ...] = ()
    source: str | None = None
    timestamp: str | None = None


CeStatement = NewInstance | InstanceFacts | Because


@dataclass(frozen=True)
class PropertyDecl:
    name: str
    range: str = VALUE  # concept name, or "value" for literal attributes
    verb_phrase: bool = False


@dataclass(frozen=True)
class Conceptualise:
    """Concept declaration, optionally with parents and properties.

    ``declares`` is false for the extension form "conceptualise the
    person P ~ is married to ~ the person Q" which adds properties to an
    already-declared concept."""

    name: str
    parents: tuple[str, ...] = ()
    properties: tuple[PropertyDecl, ...] = ()
    declares: bool = True


@dataclass(frozen=True)
class SynonymDecl:
    target_kind: str  # "concept" | "property" | "instance"
    target: str
    surfaces: tuple[str, ...] = ()


@dataclass(frozen=True)
class StaticInstance:
    concept: str
    id: str


CeModelDecl = Conceptualise | SynonymDecl | StaticInstance


# ----------------------------------------------------------------------
# tokenizer

WORD = "word"
QUOTED = "quoted"
TILDE = "tilde"
PERIOD = "period"

_WORD_RE = re.compile(r"[^\s~.'`()]+")


@dataclass(frozen=True)
class Token:
    type: str
    value: str
    line: int
    column: int


@dataclass
class SentenceTokens:
    """One period-terminated sentence: its tokens (period excluded),
    source text, position, and any trailing same-line comment."""

    tokens: list[Token]
    text: str
    line: int
    comment: str | None = None


def _tokenize(text: str):
    tokens: list[Token] = []
    comments: list[tuple[int, int, str]] = []  # (token position, line, text)
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if text.startswith("--", i):
            end = text.find("\n", i)
            end = n if end == -1 else end
            comments.append((len(tokens), line, text[i + 2 : end].strip()))
            col += end - i
            i = end
            continue
        if ch == "~":
            tokens.append(Token(TILDE, "~", line, col))
            i += 1
            col += 1
            continue
        if ch == ".":
            tokens.append(Token(PERIOD, ".", line, col))
            i += 1
            col += 1
            continue
        if ch in "'`":
            close = text.find("'", i + 1)
            if close == -1:
                raise CeSyntaxError("unterminated quote", line, col)
            tokens.append(Token(QUOTED, text[i + 1 : close], line, col))
            col += close + 1 - i
            i = close + 1
            continue
        m = _WORD_RE.match(text, i)
        if not m:
            raise CeSyntaxError(f"unexpected character {ch!r}", line, col)
        tokens.append(Token(WORD, m.group(), line, col))
        col += len(m.group())
        i = m.end()
    return tokens, comments


def split_sentences(text: str) -> list[SentenceTokens]:
    """Split CE text into period-terminated sentences.

    A comment on the same line as a sentence's closing period is
    attached to that sentence (used for provenance notes); other
    comments are discarded."""
    tokens, comments = _tokenize(text)
    sentences: list[SentenceTokens] = []
    ends: list[tuple[int, int]] = []  # (token position after period, period line)
    start = 0
    for idx, tok in enumerate(tokens):
        if tok.type == PERIOD:
            body = tokens[start:idx]
            if body:
                sentences.append(SentenceTokens(body, _span_text(body), body[0].line))
                ends.append((idx + 1, tok.line))
            start = idx + 1
    if start < len(tokens):
        tail = tokens[start:]
        raise CeSyntaxError(
            "sentence is missing its final period", tail[0].line, tail[0].column
        )
    for pos, line, comment in comments:
        for sentence, (end_pos, end_line) in zip(sentences, ends):
            if pos <= end_pos:
                if pos == end_pos and line == end_line and sentence.comment is None:
                    sentence.comment = comment
                break
    return sentences


def _span_text(tokens: list[Token]) -> str:
    parts = []
    for tok in tokens:
        if tok.type == QUOTED:
            parts.append(f"'{tok.value}'")
        else:
            parts.append(tok.value)
    return " ".join(parts)


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def peek(self, ahead: int = 0) -> Token | None:
        idx = self.pos + ahead
        return self.tokens[idx] if idx < len(self.tokens) else None

    def peek_word(self, ahead: int = 0) -> str | None:
        tok = self.peek(ahead)
        return tok.value.casefold() if tok is not None and tok.type == WORD else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token(WORD, "", 0, 0)
            raise CeSyntaxError("unexpected end of sentence", last.line, last.column)
        self.pos += 1
        return tok

    def expect_word(self, *options: str) -> str:
        tok = self.next()
        if tok.type != WORD or tok.value.casefold() not in options:
            raise CeSyntaxError(
                f"expected {' or '.join(repr(o) for o in options)}, got {tok.value!r}",
                tok.line,
                tok.column,
            )
        return tok.value.casefold()

    def expect_tilde(self) -> None:
        tok = self.next()
        if tok.type != TILDE:
            raise CeSyntaxError(f"expected '~', got {tok.value!r}", tok.line, tok.column)

    def error(self, message: str) -> CeSyntaxError:
        tok = self.peek() or (self.tokens[-1] if self.tokens else Token(WORD, "", 0, 0))
        return CeSyntaxError(message, tok.line, tok.column)


def _words_until(cur: _Cursor, stop: set[str], allow_quoted: bool = False) -> list[Token]:
    out = []
    while not cur.at_end():
        tok = cur.peek()
        if tok.type == TILDE:
            break
        if tok.type == WORD and tok.value.casefold() in stop:
            break
        if tok.type == QUOTED and not allow_quoted:
            break
        out.append(cur.next())
    return out


def _join(tokens: list[Token]) -> str:
    return " ".join(t.value for t in tokens)


# ----------------------------------------------------------------------
# statement parsing


def parse_statement(text: str) -> CeStatement:
    """Parse a single period-terminated CE sentence."""
    sentences = split_sentences(text)
    if len(sentences) != 1:
        raise CeSyntaxError(f"expected one sentence, found {len(sentences)}", 1, 1)
    return parse_statement_sentence(sentences[0])


def parse_statements(text: str) -> list[CeStatement]:
    return [parse_statement_sentence(s) for s in split_sentences(text)]


def parse_statement_sentence(sentence: SentenceTokens) -> CeStatement:
    cur = _Cursor(sentence.tokens)
    head = cur.peek_word()
    if head == "because":
        return _parse_because(cur)
    stmt = _parse_simple_statement(cur)
    if not cur.at_end():
        raise cur.error("trailing tokens after statement")
    return stmt


def _parse_simple_statement(cur: _Cursor) -> NewInstance | InstanceFacts:
    head = cur.peek_word()
    if head == "there":
        cur.expect_word("there")
        cur.expect_word("is")
        cur.expect_word("a", "an")
        concept_tokens = _words_until(cur, {"named"})
        if not concept_tokens:
            raise cur.error("expected a concept name")
        cur.expect_word("named")
        id_tok = cur.next()
        clauses: tuple[Clause, ...] = ()
        if cur.peek_word() == "that":
            cur.next()
            clauses = tuple(_parse_clauses(cur))
        return NewInstance(_join(concept_tokens), id_tok.value, clauses)
    if head == "the":
        cur.expect_word("the")
        return _parse_the_form(cur)
    raise cur.error("expected 'there is', 'the' or 'because'")


def _parse_the_form(cur: _Cursor) -> InstanceFacts:
    # "the <concept words> <id> <clauses>"; the id is one token, so try
    # boundaries left to right until the clause tail parses
    rest = cur.tokens[cur.pos :]
    first_error: CeSyntaxError | None = None
    for boundary in range(1, len(rest)):
        concept_tokens = rest[:boundary]
        if any(t.type != WORD for t in concept_tokens):
            break
        id_tok = rest[boundary]
        if id_tok.type == TILDE:
            break
        attempt = _Cursor(rest[boundary + 1 :])
        try:
            clauses = _parse_clauses(attempt)
            if not attempt.at_end() or not clauses:
                raise attempt.error("could not parse clauses")
        except CeSyntaxError as err:
            if first_error is None:
                first_error = err
            continue
        cur.pos = len(cur.tokens)
        return InstanceFacts(_join(concept_tokens), id_tok.value, tuple(clauses))
    raise first_error or cur.error("could not parse 'the ...' statement")


def _parse_because(cur: _Cursor) -> Because:
    cur.expect_word("because")
    statements = []
    source = None
    timestamp = None
    while True:
        if cur.peek_word() == "was":
            cur.expect_word("was")
            cur.expect_word("reported")
            cur.expect_word("by")
            source = cur.next().value
            if cur.peek_word() == "at":
                cur.next()
                timestamp = cur.next().value
            break
        statements.append(_parse_simple_statement_embedded(cur))
        if cur.at_end():
            break
        cur.expect_word("and")
    if not cur.at_end():
        raise cur.error("trailing tokens after because-statement")
    return Because(tuple(statements), source, timestamp)


def _parse_simple_statement_embedded(cur: _Cursor) -> NewInstance | InstanceFacts:
    head = cur.peek_word()
    if head == "there":
        cur.expect_word("there")
        cur.expect_word("is")
        cur.expect_word("a", "an")
        concept_tokens = _words_until(cur, {"named"})
        cur.expect_word("named")
        id_tok = cur.next()
        clauses: tuple[Clause, ...] = ()
        if cur.peek_word() == "that":
            cur.next()
            clauses = tuple(_parse_clauses(cur, in_because=True))
        return NewInstance(_join(concept_tokens), id_tok.value, clauses)
    if head == "the":
        cur.expect_word("the")
        return _parse_the_form_embedded(cur)
    raise cur.error("expected an embedded statement")


def _parse_the_form_embedded(cur: _Cursor) -> InstanceFacts:
    rest = cur.tokens[cur.pos :]
    first_error: CeSyntaxError | None = None
    for boundary in range(1, len(rest)):
        concept_tokens = rest[:boundary]
        if any(t.type != WORD for t in concept_tokens):
            break
        id_tok = rest[boundary]
        attempt = _Cursor(rest[boundary + 1 :])
        try:
            clauses = _parse_clauses(attempt, in_because=True)
            if not clauses:
                raise attempt.error("could not parse clauses")
            nxt = attempt.peek_word()
            if not (attempt.at_end() or nxt == "and"):
                raise attempt.error("could not parse clauses")
        except CeSyntaxError as err:
            if first_error is None:
                first_error = err
            continue
        cur.pos += boundary + 1 + attempt.pos
        return InstanceFacts(_join(concept_tokens), id_tok.value, tuple(clauses))
    raise first_error or cur.error("could not parse embedded 'the ...' statement")


def _starts_new_statement(cur: _Cursor) -> bool:
    w = cur.peek_word()
    if w == "there":
        return cur.peek_word(1) == "is"
    if w == "was":
        return cur.peek_word(1) == "reported"
    return w == "the"


def _parse_clauses(cur: _Cursor, in_because: bool = False) -> list[Clause]:
    clauses = [_parse_clause(cur, in_because)]
    while cur.peek_word() == "and":
        if in_because:
            mark = cur.pos
            cur.next()
            if _starts_new_statement(cur):
                cur.pos = mark
                return clauses
        else:
            cur.next()
        clauses.append(_parse_clause(cur, in_because))
    return clauses


def _parse_clause(cur: _Cursor, in_because: bool = False) -> Clause:
    word = cur.peek_word()
    if word is None:
        raise cur.error("expected a clause")
    if word == "has":
        return _parse_has_clause(cur, in_because)
    if word == "is":
        nxt = cur.peek_word(1)
        if nxt in ("a", "an"):
            cur.next()
            cur.next()
            concept_tokens = _words_until(cur, {"and"})
            if not concept_tokens:
                raise cur.error("expected a concept after 'is a'")
            return IsA(_join(concept_tokens))
        if nxt == "known" and cur.peek_word(2) == "as":
            cur.next()
            cur.next()
            cur.next()
            label = cur.next()
            return KnownAs(label.value)
    return _parse_verb_phrase_clause(cur, in_because)


def _parse_has_clause(cur: _Cursor, in_because: bool) -> PropertyClause:
    cur.expect_word("has")
    if cur.peek_word() == "the":
        cur.next()
        ref_tokens = _words_until(cur, {"as"}, allow_quoted=True)
        if len(ref_tokens) < 2:
            raise cur.error("expected '<concept> <id>' after 'has the'")
        cur.expect_word("as")
        name_tokens = _words_until(cur, {"and"})
        if not name_tokens:
            raise cur.error("expected a property name after 'as'")
        concept = _join(ref_tokens[:-1])
        if any(t.type != WORD for t in ref_tokens[:-1]):
            raise cur.error("concept names cannot be quoted")
        return PropertyClause(
            _join(name_tokens), InstanceRef(concept, ref_tokens[-1].value)
        )
    value_tokens = _words_until(cur, {"as"}, allow_quoted=True)
    if not value_tokens:
        raise cur.error("expected a value after 'has'")
    cur.expect_word("as")
    name_tokens = _words_until(cur, {"and"})
    if not name_tokens:
        raise cur.error("expected a property name after 'as'")
    value = value_tokens[0].value if len(value_tokens) == 1 else _join(value_tokens)
    return PropertyClause(_join(name_tokens), value)


def _parse_verb_phrase_clause(cur: _Cursor, in_because: bool) -> PropertyClause:
    vp_tokens = _words_until(cur, {"the"})
    if not vp_tokens:
        raise cur.error("expected a clause")
    # "has" and "as" belong to the has-form, and "is" can only lead a
    # verb phrase; both rules keep the statement boundary search honest
    if any(t.value.casefold() in ("has", "as") for t in vp_tokens):
        raise cur.error(f"{_join(vp_tokens)!r} is not a verb phrase")
    if any(t.value.casefold() == "is" for t in vp_tokens[1:]):
        raise cur.error(f"{_join(vp_tokens)!r} is not a verb phrase")
    if cur.peek_word() != "the":
        raise cur.error(f"expected 'the' after {_join(vp_tokens)!r}")
    cur.next()
    ref_tokens = _words_until(cur, {"and"}, allow_quoted=True)
    if len(ref_tokens) < 2:
        raise cur.error("expected '<concept> <id>' in verb-phrase clause")
    if any(t.type == WORD and t.value.casefold() == "as" for t in ref_tokens):
        raise cur.error("unexpected 'as' in verb-phrase clause")
    if any(t.type != WORD for t in ref_tokens[:-1]):
        raise cur.error("concept names cannot be quoted")
    return PropertyClause(
        _join(vp_tokens),
        InstanceRef(_join(ref_tokens[:-1]), ref_tokens[-1].value),
        verb_phrase=True,
    )


# ----------------------------------------------------------------------
# model-declaration parsing


_MODEL_HEADS = re.compile(
    r"^\s*(conceptualise\b|the\s+entity\s+concept\b|the\s+relation\s+concept\b|the\s+instance\s+')",
    re.IGNORECASE,
)


def is_model_decl(sentence_text: str) -> bool:
    return bool(_MODEL_HEADS.match(sentence_text))


def parse_model(text: str) -> list[CeModelDecl]:
    """Parse a model file: concept, synonym and static-instance
    declarations, in order.  Unknown forms are reported with their
    position."""
    return [parse_model_sentence(s) for s in split_sentences(text)]


def parse_model_sentence(sentence: SentenceTokens) -> CeModelDecl:
    cur = _Cursor(sentence.tokens)
    head = cur.peek_word()
    if head == "conceptualise":
        return _parse_conceptualise(cur)
    if head == "the":
        return _parse_synonym_decl(cur)
    if head == "there":
        stmt = _parse_simple_statement(cur)
        if not cur.at_end():
            raise cur.error("trailing tokens after declaration")
        if not isinstance(stmt, NewInstance) or stmt.clauses:
            raise CeSyntaxError(
                "static instance declarations take no clauses",
                sentence.tokens[0].line,
                sentence.tokens[0].column,
            )
        return StaticInstance(stmt.concept, stmt.id)
    raise cur.error("unknown declaration form")


def _parse_conceptualise(cur: _Cursor) -> Conceptualise:
    cur.expect_word("conceptualise")
    word = cur.expect_word("a", "an", "the")
    if word == "the":
        # extension form: conceptualise the person P ~ is married to ~ the person Q
        head_tokens = _words_until(cur, set())
        if len(head_tokens) < 2:
            raise cur.error("expected '<concept> <variable>'")
        name = _join(head_tokens[:-1])
        properties = [_parse_vp_decl(cur)]
        while cur.peek_word() == "and":
            cur.next()
            properties.append(_parse_vp_decl(cur))
        if not cur.at_end():
            raise cur.error("trailing tokens after declaration")
        return Conceptualise(name, properties=tuple(properties), declares=False)
    cur.expect_tilde()
    name_tokens = _words_until(cur, set())
    if not name_tokens:
        raise cur.error("expected a concept name")
    cur.expect_tilde()
    tok = cur.peek()
    if tok is not None and tok.type == WORD and tok.value.casefold() != "that":
        cur.next()  # the variable letter, unused by the engine
    parents: list[str] = []
    properties: list[PropertyDecl] = []
    if cur.peek_word() == "that":
        cur.next()
        while True:
            _parse_decl_clause(cur, parents, properties)
            if cur.peek_word() == "and":
                cur.next()
                continue
            break
    if not cur.at_end():
        raise cur.error("trailing tokens after declaration")
    return Conceptualise(_join(name_tokens), tuple(parents), tuple(properties))


def _parse_decl_clause(cur, parents: list[str], properties: list[PropertyDecl]) -> None:
    word = cur.peek_word()
    if word == "is":
        cur.next()
        cur.expect_word("a", "an")
        tokens = _words_until(cur, {"and"})
        if not tokens:
            raise cur.error("expected a parent concept")
        parents.append(_join(tokens))
        return
    if word == "has":
        cur.next()
        cur.expect_word("the")
        range_tokens = _words_until(cur, {"as"})
        if len(range_tokens) < 2:
            raise cur.error("expected '<range> <variable>' after 'has the'")
        rng = _join(range_tokens[:-1])
        cur.expect_word("as")
        cur.expect_tilde()
        name_tokens = _words_until(cur, set())
        if not name_tokens:
            raise cur.error("expected a property name")
        cur.expect_tilde()
        properties.append(PropertyDecl(_join(name_tokens), rng))
        return
    tok = cur.peek()
    if tok is not None and tok.type == TILDE:
        properties.append(_parse_vp_decl(cur))
        return
    raise cur.error("expected 'is a', 'has the' or '~' in conceptualise")


def _parse_vp_decl(cur: _Cursor) -> PropertyDecl:
    cur.expect_tilde()
    name_tokens = _words_until(cur, set())
    if not name_tokens:
        raise cur.error("expected a property name")
    cur.expect_tilde()
    cur.expect_word("the")
    range_tokens = _words_until(cur, {"and"})
    if len(range_tokens) < 2:
        raise cur.error("expected '<range> <variable>'")
    return PropertyDecl(_join(name_tokens), _join(range_tokens[:-1]), verb_phrase=True)


def _parse_synonym_decl(cur: _Cursor) -> SynonymDecl:
    cur.expect_word("the")
    word = cur.expect_word("entity", "relation", "instance")
    if word in ("entity", "relation"):
        cur.expect_word("concept")
        kind = "concept" if word == "entity" else "property"
    else:
        kind = "instance"
    target_tok = cur.next()
    if target_tok.type != QUOTED:
        raise CeSyntaxError(
            "synonym target must be quoted", target_tok.line, target_tok.column
        )
    surfaces = []
    while not cur.at_end():
        if surfaces:
            cur.expect_word("and")
        cur.expect_word("is")
        cur.expect_word("expressed")
        cur.expect_word("by")
        cur.expect_word("the")
        cur.expect_word("value")
        surface = cur.next()
        if surface.type != QUOTED:
            raise CeSyntaxError(
                "synonym surface must be quoted", surface.line, surface.column
            )
        surfaces.append(surface.value)
    if not surfaces:
        raise cur.error("expected at least one 'is expressed by the value ...'")
    return SynonymDecl(kind, target_tok.value, tuple(surfaces))


# ----------------------------------------------------------------------
# rendering

_PLAIN = re.compile(r"[A-Za-z0-9_?-]+")

# words with grammatical meaning render quoted even when plain
_RESERVED = frozenset(
    {"a", "an", "and", "as", "because", "has", "is", "named", "that", "the", "there", "was"}
)


def _quoted_if_needed(value: str) -> str:
    if (
        _PLAIN.fullmatch(value)
        and value.casefold() not in _RESERVED
        and not value.startswith("--")  # would read as a comment
    ):
        return value
    return f"'{value}'"


def _article(name: str) -> str:
    return "an" if name[:1].casefold() in "aeiou" else "a"


def render_clause(clause: Clause) -> str:
    if isinstance(clause, IsA):
        return f"is {_article(clause.concept)} {clause.concept}"
    if isinstance(clause, KnownAs):
        return f"is known as '{clause.label}'"
    if isinstance(clause.value, InstanceRef):
        ref = clause.value
        target = f"the {ref.concept} {_quoted_if_needed(ref.id)}"
        if clause.verb_phrase:
            return f"{clause.name} {target}"
        return f"has {target} as {clause.name}"
    return f"has {_quoted_if_needed(clause.value)} as {clause.name}"


def render_statement(stmt: CeStatement) -> str:
    """Canonical single-line text; rendering is deterministic and
    parse(render(s)) is structurally equal to s."""
    return _render_body(stmt) + "."


def _render_body(stmt: CeStatement) -> str:
    if isinstance(stmt, NewInstance):
        head = f"there is {_article(stmt.concept)} {stmt.concept} named {_quoted_if_needed(stmt.id)}"
        if not stmt.clauses:
            return head
        return head + " that " + " and ".join(render_clause(c) for c in stmt.clauses)
    if isinstance(stmt, InstanceFacts):
        body = " and ".join(render_clause(c) for c in stmt.clauses)
        ident = _quoted_if_needed(stmt.id)
        # a plain id between a multi-word concept and a leading verb
        # phrase is ambiguous to a model-free reader; quote it
        if (
            " " in stmt.concept
            and stmt.clauses
            and isinstance(stmt.clauses[0], PropertyClause)
            and stmt.clauses[0].verb_phrase
            and not stmt.clauses[0].name.casefold().startswith("is ")
            and not ident.startswith("'")
        ):
            ident = f"'{stmt.id}'"
        return f"the {stmt.concept} {ident} {body}"
    parts = [_render_body(s) for s in stmt.statements]
    if stmt.source is not None:
        citation = f"was reported by '{stmt.source}'"
        if stmt.timestamp is not None:
            citation += f" at '{stmt.timestamp}'"
        parts.append(citation)
    return "because " + " and ".join(parts)


def render_statements(statements) -> str:
    return "\n".join(render_statement(s) for s in statements)


def render_model_decl(decl: CeModelDecl) -> str:
    if isinstance(decl, StaticInstance):
        return f"there is {_article(decl.concept)} {decl.concept} named {_quoted_if_needed(decl.id)}."
    if isinstance(decl, SynonymDecl):
        kind = {"concept": "entity concept", "property": "relation concept", "instance": "instance"}[
            decl.target_kind
        ]
        bindings = " and ".join(
            f"is expressed by the value '{s}'" for s in decl.surfaces
        )
        return f"the {kind} '{decl.target}' {bindings}."
    if not decl.declares:
        body = " and ".join(
            f"~ {p.name} ~ the {p.range} {_var_for(p.range, i)}"
            for i, p in enumerate(decl.properties)
        )
        return f"conceptualise the {decl.name} X {body}."
    clauses = [f"is {_article(p)} {p}" for p in decl.parents]
    for i, prop in enumerate(decl.properties):
        if prop.verb_phrase:
            clauses.append(f"~ {prop.name} ~ the {prop.range} {_var_for(prop.range, i)}")
        else:
            clauses.append(f"has the {prop.range} {_var_for(prop.range, i)} as ~ {prop.name} ~")
    head = f"conceptualise {_article(decl.name)} ~ {decl.name} ~ {_var_for(decl.name, 0).upper()}"
    if clauses:
        return head + " that " + " and ".join(clauses) + "."
    return head + "."


def _var_for(name: str, i: int) -> str:
    letter = name[:1].upper() or "X"
    return f"{letter}{i + 1}"
