"""Bag-of-words interpretation of natural-language reports.

Input text is split into phrases, sentences, clauses and words; each
sentence is scanned left to right with multi-word lookahead against the
knowledge base (names plus synonyms, longest match wins); the matches
are then assembled into controlled-English statements using property
domains and ranges; one point is scored per recognised concept,
instance or property occurrence that survives assembly.

No deep parsing, no grammar checking: unknown words are simply
recorded as unmatched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import ce
from .kernel import (
    KnowledgeBase,
    Match,
    PropertyDef,
    fold,
    preferred_match,
)

DEFAULT_LOOKAHEAD = 4  # longest bundled term is three words, plus margin

# Function words are never captured as property values or descriptions.
STOPWORDS = frozenset(
    "a an the is are was were be been am and or of to in on at by for "
    "with it its this that these those there has have had".split()
)

_SENTENCE_SPLIT = re.compile(r"[.!?]+")
_CLAUSE_SPLIT = re.compile(r"[,;:]+")
_PHRASE_SPLIT = re.compile(r"\n\s*\n")
_EDGE_PUNCT = re.compile(r"^\W+|\W+$", re.UNICODE)


@dataclass(frozen=True)
class Word:
    text: str
    folded: str
    index: int  # position within the sentence


@dataclass
class Clause:
    words: list[Word]


@dataclass
class Sentence:
    clauses: list[Clause]

    @property
    def words(self) -> list[Word]:
        return [w for c in self.clauses for w in c.words]

    def clause_of(self, index: int) -> int:
        for ci, clause in enumerate(self.clauses):
            if any(w.index == index for w in clause.words):
                return ci
        return -1


@dataclass
class Phrase:
    sentences: list[Sentence]


@dataclass
class TokenizedInput:
    text: str
    phrases: list[Phrase]

    @property
    def sentences(self) -> list[Sentence]:
        return [s for p in self.phrases for s in p.sentences]

    @property
    def phrase_count(self) -> int:
        return len(self.phrases)

    @property
    def sentence_count(self) -> int:
        return len(self.sentences)

    @property
    def clause_count(self) -> int:
        return sum(len(s.clauses) for s in self.sentences)

    @property
    def word_count(self) -> int:
        return sum(len(s.words) for s in self.sentences)


def tokenize(text: str) -> TokenizedInput:
    """Split text into phrases / sentences / clauses / words.

    Sentences end at . ! ?, clauses at , ; :, words at whitespace with
    leading and trailing punctuation stripped.  Case-folded copies ride
    along with the originals.  Empty text gives an empty structure."""
    phrases = []
    for part in _PHRASE_SPLIT.split(text):
        sentences = []
        for raw_sentence in _SENTENCE_SPLIT.split(part):
            clauses = []
            index = 0
            for raw_clause in _CLAUSE_SPLIT.split(raw_sentence):
                words = []
                for raw in raw_clause.split():
                    stripped = _EDGE_PUNCT.sub("", raw)
                    if stripped:
                        words.append(Word(stripped, fold(stripped), index))
                        index += 1
                if words:
                    clauses.append(Clause(words))
            if clauses:
                sentences.append(Sentence(clauses))
        if sentences:
            phrases.append(Phrase(sentences))
    return TokenizedInput(text, phrases)


@dataclass(frozen=True)
class MatchSpan:
    """A recognised word range: element matched and how (direct name or
    synonym surface)."""

    start: int
    length: int
    match: Match
    via: str  # "name" | "synonym"
    surface: str
    sentence: int = 0

    @property
    def end(self) -> int:
        return self.start + self.length


def scan(
    sentence: Sentence,
    kb: KnowledgeBase,
    lookahead: int = DEFAULT_LOOKAHEAD,
    sentence_index: int = 0,
) -> list[MatchSpan]:
    """Greedy longest-match scan of one sentence.

    At each position the longest sequence (up to ``lookahead`` words,
    never crossing a clause boundary) with a non-empty lookup wins;
    scanning resumes after the consumed span.  Ties between element
    kinds prefer instances over properties over concepts."""
    spans: list[MatchSpan] = []
    for clause in sentence.clauses:
        words = clause.words
        pos = 0
        while pos < len(words):
            found = None
            for length in range(min(lookahead, len(words) - pos), 0, -1):
                window = words[pos : pos + length]
                matches = kb.lookup_surface([w.folded for w in window])
                if matches:
                    found = (length, preferred_match(matches), window)
                    break
            if found is None:
                pos += 1
                continue
            length, match, window = found
            spans.append(
                MatchSpan(
                    start=window[0].index,
                    length=length,
                    match=match,
                    via=_via(kb, match, [w.folded for w in window]),
                    surface=" ".join(w.text for w in window),
                    sentence=sentence_index,
                )
            )
            pos += length
    return spans


def _via(kb: KnowledgeBase, match: Match, folded_words: list[str]) -> str:
    key = tuple(folded_words)
    if match.kind == "concept" and key == tuple(fold(match.key).split()):
        return "name"
    if match.kind == "property":
        pdef = kb.properties[match.key]
        if key == tuple(fold(pdef.name).split()):
            return "name"
    if match.kind == "instance":
        inst = kb.instances[match.key]
        if key == tuple(fold(inst.id).split()):
            return "name"
        if inst.label and key == tuple(fold(inst.label).split()):
            return "name"
    return "synonym"


@dataclass
class NewInstanceInfo:
    id: str
    concept: str
    description: str | None = None


@dataclass
class Interpretation:
    """Everything the interpreter understood from one submission."""

    text: str
    tokenized: TokenizedInput
    spans: list[MatchSpan] = field(default_factory=list)
    statements: list[ce.CeStatement] = field(default_factory=list)
    new_instances: list[NewInstanceInfo] = field(default_factory=list)
    contributing: list[MatchSpan] = field(default_factory=list)
    unmatched_words: list[str] = field(default_factory=list)

    @property
    def score(self) -> int:
        return score(self)

    def ce_text(self) -> str:
        return ce.render_statements(self.statements)


def score(interpretation: Interpretation) -> int:
    """One point per concept, instance or property occurrence that was
    recognised and survived assembly (dropped slots do not count)."""
    return len(interpretation.contributing)


# ----------------------------------------------------------------------
# assembly


class _Draft:
    """A statement under construction for one subject instance."""

    def __init__(self, concept: str, instance_id: str, is_new: bool, label: str | None = None):
        self.concept = concept
        self.id = instance_id
        self.is_new = is_new
        self.label = label
        self.clauses: list[tuple[tuple, ce.Clause]] = []
        self.retypes: set[str] = set()

    def add(self, order_key: tuple, clause: ce.Clause) -> None:
        self.clauses.append((order_key, clause))

    def statement(self) -> ce.CeStatement | None:
        if not self.clauses and not self.is_new:
            return None
        ordered = [c for _, c in sorted(self.clauses, key=lambda it: it[0])]
        if self.is_new:
            return ce.NewInstance(self.concept, self.id, tuple(ordered))
        return ce.InstanceFacts(self.concept, self.id, tuple(ordered))


class _Assembler:
    def __init__(self, kb: KnowledgeBase, sentence: Sentence, spans: list[MatchSpan]):
        self.kb = kb
        self.sentence = sentence
        self.spans = spans
        self.words = {w.index: w for w in sentence.words}
        self.span_starts = {s.start: s for s in spans}
        self.covered = {i for s in spans for i in range(s.start, s.end)}
        self.consumed_words: set[int] = set()
        self.consumed_spans: set[int] = set()
        self.dropped_spans: set[int] = set()
        self.drafts: list[_Draft] = []
        self.draft_index: dict[tuple[str, str], _Draft] = {}
        self.subject: _Draft | None = None
        self.new_instances: list[NewInstanceInfo] = []
        self._prop_order = {ident: i for i, ident in enumerate(kb.properties)}
        self._clause_seq = 0

    # -- helpers ------------------------------------------------------

    def _clause_of(self, index: int) -> int:
        return self.sentence.clause_of(index)

    def _new_draft(self, concept: str, instance_id: str, is_new: bool) -> _Draft:
        draft = _Draft(concept, instance_id, is_new)
        self.drafts.append(draft)
        self.draft_index[(concept, instance_id)] = draft
        return draft

    def _fresh_instance(self, concept: str, description: str | None) -> _Draft:
        instance_id = self.kb.fresh_id(concept)
        draft = self._new_draft(concept, instance_id, is_new=True)
        self.new_instances.append(NewInstanceInfo(instance_id, concept, description))
        if description is not None:
            pdef = self._description_property(concept)
            if pdef is not None:
                draft.add(self._clause_key(pdef), ce.PropertyClause(pdef.name, description))
        return draft

    def _description_property(self, concept: str) -> PropertyDef | None:
        for pdef in self.kb.properties_of(concept):
            if pdef.is_attribute and fold(pdef.name) == "description":
                return pdef
        return None

    def _open_class(self, concept: str) -> bool:
        # concepts whose individuals arrive as free text (persons) carry
        # a description attribute; closed value sets (directions) do not
        return self._description_property(concept) is not None

    def _clause_key(self, pdef: PropertyDef) -> tuple:
        # property clauses sort by model declaration order, is-a last
        self._clause_seq += 1
        return (0, self._prop_order.get(pdef.identity, len(self._prop_order)), self._clause_seq)

    def _subject_types(self) -> set[str]:
        assert self.subject is not None
        if self.subject.id in self.kb.instances:
            types = set(self.kb.instance_types(self.subject.id))
        else:
            types = set(self.kb.ancestors(self.subject.concept))
        for extra in self.subject.retypes:
            types |= self.kb.ancestors(extra)
        return types

    def _subject_properties(self) -> list[PropertyDef]:
        out: list[PropertyDef] = []
        seen: set[str] = set()
        assert self.subject is not None
        for concept in [self.subject.concept, *sorted(self.subject.retypes)]:
            for pdef in self.kb.properties_of(concept):
                if pdef.identity not in seen:
                    seen.add(pdef.identity)
                    out.append(pdef)
        return out

    def _free_word_at(self, idx: int, clause: int) -> Word | None:
        word = self.words.get(idx)
        if (
            word is not None
            and idx not in self.covered
            and idx not in self.consumed_words
            and word.folded not in STOPWORDS
            and self._clause_of(idx) == clause
        ):
            return word
        return None

    def _adjacent_free_word(self, span: MatchSpan) -> Word | None:
        """The single unmatched, unconsumed word right after the span,
        or right before it as a fallback; never crosses clauses."""
        clause = self._clause_of(span.start)
        for idx in (span.end, span.start - 1):
            word = self._free_word_at(idx, clause)
            if word is not None:
                return word
        return None

    def _nearby_instance_span(self, i: int, span: MatchSpan, rng: str) -> int | None:
        """Nearest unconsumed instance span of the right type in the
        same clause: following first, then preceding."""
        clause = self._clause_of(span.start)
        following: list[tuple[int, int]] = []
        preceding: list[tuple[int, int]] = []
        for j, other in enumerate(self.spans):
            if j == i or j in self.consumed_spans or j in self.dropped_spans:
                continue
            if other.match.kind != "instance":
                continue
            if self._clause_of(other.start) != clause:
                continue
            if rng not in self.kb.instance_types(other.match.key):
                continue
            if other.start >= span.end:
                following.append((other.start - span.end, j))
            elif other.end <= span.start:
                preceding.append((span.start - other.end, j))
        if following:
            return min(following)[1]
        if preceding:
            return min(preceding)[1]
        return None

    # -- span handling ------------------------------------------------

    def run(self) -> None:
        for i, span in enumerate(self.spans):
            if i in self.consumed_spans:
                continue
            kind = span.match.kind
            if kind == "concept":
                self.subject = self._fresh_instance(span.match.key, None)
            elif kind == "instance":
                self._handle_instance(span)
            else:
                self._handle_property(i, span)

    def _handle_instance(self, span: MatchSpan) -> None:
        inst = self.kb.get_instance(span.match.key)
        if self.subject is not None:
            for pdef in self._subject_properties():
                if pdef.is_attribute:
                    continue
                if pdef.range in self.kb.instance_types(inst.id):
                    target = self._target_draft(pdef)
                    target.add(
                        self._clause_key(pdef),
                        ce.PropertyClause(
                            pdef.name,
                            ce.InstanceRef(inst.concept, inst.id),
                            verb_phrase=pdef.verb_phrase,
                        ),
                    )
                    return
        key = (inst.concept, inst.id)
        draft = self.draft_index.get(key)
        if draft is None:
            draft = self._new_draft(inst.concept, inst.id, is_new=False)
        self.subject = draft

    def _handle_property(self, i: int, span: MatchSpan) -> None:
        pdef = self.kb.properties[span.match.key]
        if pdef.is_attribute:
            word = self._adjacent_free_word(span)
            if word is None:
                self.dropped_spans.add(i)
                return
            # claim the value word before minting a subject, so it can
            # never double as the fresh subject's description
            self.consumed_words.add(word.index)
            self._ensure_subject(pdef, span)
            target = self._target_draft(pdef)
            target.add(self._clause_key(pdef), ce.PropertyClause(pdef.name, word.text))
            return
        j = self._nearby_instance_span(i, span, pdef.range)
        free_word = None
        if j is None:
            if self._open_class(pdef.range):
                free_word = self._adjacent_free_word(span)
            if free_word is None:
                self.dropped_spans.add(i)
                return
            self.consumed_words.add(free_word.index)
        else:
            self.consumed_spans.add(j)
        self._ensure_subject(pdef, span)
        if j is not None:
            other = self.kb.get_instance(self.spans[j].match.key)
            ref = ce.InstanceRef(other.concept, other.id)
        else:
            obj = self._fresh_instance(pdef.range, free_word.text)
            ref = ce.InstanceRef(obj.concept, obj.id)
        target = self._target_draft(pdef)
        target.add(
            self._clause_key(pdef),
            ce.PropertyClause(pdef.name, ref, verb_phrase=pdef.verb_phrase),
        )

    def _ensure_subject(self, pdef: PropertyDef, span: MatchSpan) -> None:
        """Make sure a subject exists; a property with no subject mints
        a fresh domain-typed one, described by the preceding free word
        when the domain is open-class (e.g. "Fred is married to ...")."""
        if self.subject is not None:
            return
        description = None
        if self._open_class(pdef.domain):
            word = self._free_word_at(span.start - 1, self._clause_of(span.start))
            if word is not None:
                description = word.text
                self.consumed_words.add(word.index)
        self.subject = self._fresh_instance(pdef.domain, description)

    def _target_draft(self, pdef: PropertyDef) -> _Draft:
        """Draft the clause should land on: the subject itself when its
        domain covers the subject, otherwise the subject re-typed into
        the property's domain in a separate sentence."""
        assert self.subject is not None
        if pdef.domain in self._subject_types():
            return self.subject
        if pdef.domain not in self.subject.retypes:
            self.subject.retypes.add(pdef.domain)
            self._clause_seq += 1
            self.subject.add((1, self._clause_seq), ce.IsA(pdef.domain))
        key = (pdef.domain, self.subject.id)
        draft = self.draft_index.get(key)
        if draft is None:
            draft = self._new_draft(pdef.domain, self.subject.id, is_new=True)
        return draft

    # -- results ------------------------------------------------------

    def statements(self) -> list[ce.CeStatement]:
        out = []
        for draft in self.drafts:
            stmt = draft.statement()
            if stmt is not None:
                out.append(stmt)
        return out

    def contributing_spans(self) -> list[MatchSpan]:
        return [s for i, s in enumerate(self.spans) if i not in self.dropped_spans]

    def unmatched(self) -> list[str]:
        return [
            w.text
            for w in self.sentence.words
            if w.index not in self.covered and w.index not in self.consumed_words
        ]


def assemble(
    spans: list[MatchSpan], sentence: Sentence, kb: KnowledgeBase
) -> _Assembler:
    """Assemble one sentence's match spans into CE statements."""
    assembler = _Assembler(kb, sentence, spans)
    assembler.run()
    return assembler


def interpret(
    text: str, kb: KnowledgeBase, lookahead: int = DEFAULT_LOOKAHEAD
) -> Interpretation:
    """Tokenize, scan and assemble a whole submission.

    Deterministic for a fixed KB state and id counters; never raises on
    arbitrary input text."""
    tokenized = tokenize(text)
    interpretation = Interpretation(text, tokenized)
    for si, sentence in enumerate(tokenized.sentences):
        spans = scan(sentence, kb, lookahead, sentence_index=si)
        assembler = assemble(spans, sentence, kb)
        interpretation.spans.extend(spans)
        interpretation.statements.extend(assembler.statements())
        interpretation.new_instances.extend(assembler.new_instances)
        interpretation.contributing.extend(assembler.contributing_spans())
        interpretation.unmatched_words.extend(assembler.unmatched())
    return interpretation
