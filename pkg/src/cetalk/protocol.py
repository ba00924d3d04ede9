"""Conversation state machine: confirm, ask/tell, gist/expand, why.

A conversation is a sequence of speech-act-tagged messages between two
or more agents.  It can begin with any interaction except why, and then
flows along a fixed whitelist: confirm to ask/tell; ask/tell to
gist/expand or why; gist/expand to why or ask/tell; why back to
ask/tell.  The whitelist is data, not code.

Every step validates before it mutates: an illegal message raises
ProtocolError and leaves the conversation untouched.  Nothing reaches
the knowledge base from a confirm interaction until the human accepts.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import asdict, dataclass, field
from enum import Enum

from . import ce, fusion, gist as gisting, interpreter as interp_mod
from .kernel import (
    CeError,
    Fact,
    KnowledgeBase,
    Pattern,
    Told,
    UnknownIdError,
    facts_to_statements,
    assert_statement,
    validate_statement,
    fold,
)


class ProtocolError(CeError):
    """An illegal (message kind, conversation state) combination."""


class MessageKind(str, Enum):
    NL_INPUT = "nl_input"
    CE_CONFIRM_REQUEST = "ce_confirm_request"
    CONFIRM_ACCEPT = "confirm_accept"
    CONFIRM_CORRECT = "confirm_correct"
    ASK = "ask"
    TELL = "tell"
    GIST = "gist"
    EXPAND_REQUEST = "expand_request"
    EXPAND = "expand"
    WHY = "why"
    BECAUSE = "because"


class Interaction(str, Enum):
    CONFIRM = "confirm"
    ASK_TELL = "ask_tell"
    GIST_EXPAND = "gist_expand"
    WHY = "why"


# legal interaction successions within one conversation
INTERACTION_FLOW: dict[Interaction | None, frozenset[Interaction]] = {
    None: frozenset({Interaction.CONFIRM, Interaction.ASK_TELL, Interaction.GIST_EXPAND}),
    Interaction.CONFIRM: frozenset({Interaction.ASK_TELL}),
    Interaction.ASK_TELL: frozenset({Interaction.GIST_EXPAND, Interaction.WHY}),
    Interaction.GIST_EXPAND: frozenset({Interaction.WHY, Interaction.ASK_TELL}),
    Interaction.WHY: frozenset({Interaction.ASK_TELL}),
}

# message kinds that may open an interaction
OPENERS: dict[MessageKind, Interaction] = {
    MessageKind.NL_INPUT: Interaction.CONFIRM,
    MessageKind.ASK: Interaction.ASK_TELL,
    MessageKind.TELL: Interaction.ASK_TELL,
    MessageKind.GIST: Interaction.GIST_EXPAND,
    MessageKind.WHY: Interaction.WHY,
}


@dataclass(frozen=True)
class Message:
    id: str
    conversation: str
    sender: str
    audience: tuple[str, ...]
    kind: MessageKind
    body: dict
    in_reply_to: str | None = None
    timestamp: float = 0.0

    def to_json(self) -> dict:
        data = asdict(self)
        data["kind"] = self.kind.value
        data["audience"] = list(self.audience)
        return data


@dataclass
class PendingCe:
    """A confirm interaction's candidate CE, not yet asserted."""

    statements: list[ce.CeStatement]
    score: int = 0
    new_instances: list = field(default_factory=list)

    def ce_text(self) -> str:
        return ce.render_statements(self.statements)


@dataclass
class Conversation:
    id: str
    participants: tuple[str, ...]
    interaction: Interaction | None = None
    state: str = "idle"
    transcript: list[Message] = field(default_factory=list)
    pending: PendingCe | None = None
    confirmed_ce: list[str] = field(default_factory=list)
    last_asserted: list[Fact] = field(default_factory=list)

    def open(self) -> bool:
        return self.state not in ("idle", "closed", "gist_open")


@dataclass
class ProtocolContext:
    """Everything the steps need: the KB, the interpreter, gisting,
    fusion rules, and message plumbing."""

    kb: KnowledgeBase
    templates: list = field(default_factory=list)
    gist_store: gisting.GistStore = field(default_factory=gisting.GistStore)
    rules: list = field(default_factory=list)
    mandatory_slots: dict[str, list[str]] = field(default_factory=dict)
    authorized_sources: frozenset[str] | None = None  # None allows every sender
    agent_id: str = "moira"
    gist_context: gisting.GistContext = field(default_factory=gisting.GistContext)
    clock: object = time.time
    lookahead: int = interp_mod.DEFAULT_LOOKAHEAD
    _seq: itertools.count = field(default_factory=lambda: itertools.count(1))

    def interpret(self, text: str) -> interp_mod.Interpretation:
        return interp_mod.interpret(text, self.kb, self.lookahead)

    def next_id(self) -> str:
        return f"m{next(self._seq)}"

    def message(
        self,
        conversation: Conversation,
        sender: str,
        kind: MessageKind,
        body: dict,
        in_reply_to: str | None = None,
        audience: tuple[str, ...] | None = None,
    ) -> Message:
        return Message(
            id=self.next_id(),
            conversation=conversation.id,
            sender=sender,
            audience=audience or conversation.participants,
            kind=kind,
            body=body,
            in_reply_to=in_reply_to,
            timestamp=self.clock(),
        )


# ----------------------------------------------------------------------
# conversation lifecycle


def start_conversation(
    initiator: str,
    interaction: Interaction,
    message: Message,
    agent_id: str = "moira",
) -> Conversation:
    """Open a conversation with its first message recorded, awaiting the
    counterpart's move.  Why is never a legal start."""
    if interaction == Interaction.WHY:
        raise ProtocolError("a conversation cannot begin with a why interaction")
    if interaction not in INTERACTION_FLOW[None]:
        raise ProtocolError(f"conversations cannot begin with {interaction.value}")
    if OPENERS.get(message.kind) != interaction:
        raise ProtocolError(
            f"{message.kind.value} does not open a {interaction.value} interaction"
        )
    participants = tuple(dict.fromkeys((initiator, agent_id)))
    conv = Conversation(id=message.conversation, participants=participants)
    conv.interaction = interaction
    conv.state = "opened"
    conv.transcript.append(message)
    return conv


def deliver(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    """Validate, record and answer one inbound message.

    Interaction openers arriving after the current interaction has
    finished move the conversation along the flow whitelist; anything
    else out of place raises ProtocolError with no state change."""
    kind = message.kind
    if conv.interaction is None:
        raise ProtocolError("conversation has not been started")
    if not conv.open() and kind in OPENERS:
        nxt = OPENERS[kind]
        if nxt == conv.interaction and conv.interaction == Interaction.GIST_EXPAND:
            pass  # more gists within the open gist interaction
        elif nxt not in INTERACTION_FLOW[conv.interaction]:
            raise ProtocolError(
                f"a {nxt.value} interaction cannot follow {conv.interaction.value}"
            )
        _begin(conv, nxt, message)
        return _respond_opened(conv, message, ctx)
    if conv.interaction == Interaction.CONFIRM:
        return step_confirm(conv, message, ctx)
    if conv.interaction == Interaction.ASK_TELL:
        return step_ask_tell(conv, message, ctx)
    if conv.interaction == Interaction.GIST_EXPAND:
        return step_gist_expand(conv, message, ctx)
    return step_why(conv, message, ctx)


def _begin(conv: Conversation, interaction: Interaction, message: Message) -> None:
    conv.interaction = interaction
    conv.state = "opened"
    conv.pending = None
    conv.transcript.append(message)


def _respond_opened(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    if conv.interaction == Interaction.CONFIRM:
        return _confirm_request(conv, message, ctx)
    if conv.interaction == Interaction.ASK_TELL:
        if message.kind == MessageKind.ASK:
            return _answer_ask(conv, message, ctx)
        return _receive_tell(conv, message, ctx)
    if conv.interaction == Interaction.GIST_EXPAND:
        conv.state = "gist_open"
        return []
    return _answer_why(conv, message, ctx)


def process(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    """Convenience: respond to the opener recorded by start_conversation."""
    if conv.state != "opened" or conv.transcript[-1] is not message:
        raise ProtocolError("process expects the freshly opened conversation")
    return _respond_opened(conv, message, ctx)


# ----------------------------------------------------------------------
# confirm


def step_confirm(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    if conv.state == "opened" and message.kind == MessageKind.NL_INPUT:
        if conv.transcript and conv.transcript[-1] is message:
            return _confirm_request(conv, message, ctx)
        conv.transcript.append(message)
        return _confirm_request(conv, message, ctx)
    if conv.state != "awaiting_decision":
        raise ProtocolError(
            f"{message.kind.value} is not legal in confirm state '{conv.state}'"
        )
    if message.kind == MessageKind.CONFIRM_ACCEPT:
        if conv.pending is None:
            raise ProtocolError("nothing is pending confirmation")
        conv.transcript.append(message)
        provenance = Told(
            source=message.sender,
            conversation=conv.id,
            timestamp=_iso(message.timestamp),
        )
        asserted: list[Fact] = []
        for stmt in conv.pending.statements:
            asserted += assert_statement(ctx.kb, stmt, provenance)
        conv.confirmed_ce.append(conv.pending.ce_text())
        conv.last_asserted = asserted
        conv.state = "closed"
        return []
    if message.kind == MessageKind.CONFIRM_CORRECT:
        if conv.pending is None:
            raise ProtocolError("nothing is pending correction")
        revised = revise_pending(conv.pending, message.body, ctx)
        conv.transcript.append(message)
        conv.pending = revised
        reply = ctx.message(
            conv,
            ctx.agent_id,
            MessageKind.CE_CONFIRM_REQUEST,
            _confirm_body(revised, ctx),
            in_reply_to=message.id,
        )
        conv.transcript.append(reply)
        return [reply]
    raise ProtocolError(
        f"{message.kind.value} is not legal in confirm state '{conv.state}'"
    )


def _confirm_request(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    text = message.body.get("text", "")
    interpretation = ctx.interpret(text)
    pending = PendingCe(
        statements=list(interpretation.statements),
        score=interpretation.score,
        new_instances=list(interpretation.new_instances),
    )
    conv.pending = pending
    conv.state = "awaiting_decision"
    body = _confirm_body(pending, ctx)
    body["unmatched_words"] = list(interpretation.unmatched_words)
    reply = ctx.message(
        conv, ctx.agent_id, MessageKind.CE_CONFIRM_REQUEST, body, in_reply_to=message.id
    )
    conv.transcript.append(reply)
    return [reply]


def _confirm_body(pending: PendingCe, ctx: ProtocolContext) -> dict:
    ce_text = pending.ce_text()
    descriptor = gisting.gist(
        pending.statements, ctx.templates, ctx.gist_context, ctx.gist_store
    )
    return {
        "ce": ce_text,
        "gist": asdict(descriptor),
        "score": pending.score,
    }


def revise_pending(pending: PendingCe, body: dict, ctx: ProtocolContext) -> PendingCe:
    """Apply a correction: edited CE replaces the pending statements
    outright; corrective NL substitutes same-concept instances (a
    negated mention marks the value being replaced), falling back to a
    full reinterpretation when nothing lines up."""
    if "ce" in body:
        statements = ce.parse_statements(body["ce"])
        for stmt in statements:
            validate_statement(ctx.kb, stmt)
        return PendingCe(statements, pending.score, pending.new_instances)
    text = body.get("text", "")
    correction = ctx.interpret(text)
    replacements: dict[str, str] = {}
    for si, span in enumerate(correction.spans):
        if span.match.kind != "instance" or _negated(correction, span):
            continue
        concept = ctx.kb.get_instance(span.match.key).concept
        for stmt in pending.statements:
            if isinstance(stmt, ce.Because):
                continue
            for clause in stmt.clauses:
                if (
                    isinstance(clause, ce.PropertyClause)
                    and isinstance(clause.value, ce.InstanceRef)
                    and fold(clause.value.concept) == fold(concept)
                    and clause.value.id != span.match.key
                ):
                    replacements[clause.value.id] = span.match.key
    if not replacements:
        return PendingCe(
            list(correction.statements), correction.score, list(correction.new_instances)
        )
    statements = [_substitute_refs(s, replacements) for s in pending.statements]
    return PendingCe(statements, pending.score, pending.new_instances)


def _negated(interpretation: interp_mod.Interpretation, span: interp_mod.MatchSpan) -> bool:
    words = {
        w.index: w.folded
        for s in interpretation.tokenized.sentences
        for w in s.words
    }
    negators = {"not", "no", "never", "isn't", "wasn't", "isnt", "wasnt"}
    return any(words.get(span.start - d) in negators for d in (1, 2))


def _substitute_refs(stmt: ce.CeStatement, replacements: dict[str, str]):
    if isinstance(stmt, ce.Because):
        return stmt
    clauses = []
    for clause in stmt.clauses:
        if isinstance(clause, ce.PropertyClause) and isinstance(clause.value, ce.InstanceRef):
            ref = clause.value
            if ref.id in replacements:
                clause = ce.PropertyClause(
                    clause.name,
                    ce.InstanceRef(ref.concept, replacements[ref.id]),
                    clause.verb_phrase,
                )
        clauses.append(clause)
    return type(stmt)(stmt.concept, stmt.id, tuple(clauses))


# ----------------------------------------------------------------------
# ask/tell


def step_ask_tell(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    if conv.state == "opened" and message.kind == MessageKind.ASK:
        if not (conv.transcript and conv.transcript[-1] is message):
            conv.transcript.append(message)
        return _answer_ask(conv, message, ctx)
    if conv.state == "opened" and message.kind == MessageKind.TELL:
        if not (conv.transcript and conv.transcript[-1] is message):
            conv.transcript.append(message)
        return _receive_tell(conv, message, ctx)
    if conv.state == "awaiting_reply" and message.kind == MessageKind.TELL:
        conv.transcript.append(message)
        return _receive_tell(conv, message, ctx)
    raise ProtocolError(
        f"{message.kind.value} is not legal in ask/tell state '{conv.state}'"
    )


def _answer_ask(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    pattern = _pattern_from_body(message.body)
    try:
        facts = ctx.kb.query(pattern)
    except UnknownIdError as err:
        raise ProtocolError(str(err)) from err
    statements = facts_to_statements(ctx.kb, facts)
    body = {
        "ce": ce.render_statements(statements),
        "empty": not facts,
    }
    if not facts:
        body["text"] = "there are no matching facts"
    reply = ctx.message(
        conv, ctx.agent_id, MessageKind.TELL, body, in_reply_to=message.id
    )
    conv.transcript.append(reply)
    conv.state = "closed"
    return [reply]


def _receive_tell(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    if ctx.authorized_sources is not None and message.sender not in ctx.authorized_sources:
        conv.state = "closed"
        return []
    try:
        statements = ce.parse_statements(message.body.get("ce", ""))
        for stmt in statements:
            validate_statement(ctx.kb, stmt)
    except (ce.CeSyntaxError, CeError) as err:
        # malformed CE is reported, the conversation stays open for a retry
        reply = ctx.message(
            conv,
            ctx.agent_id,
            MessageKind.ASK,
            {"error": str(err), "missing": {}},
            in_reply_to=message.id,
        )
        conv.transcript.append(reply)
        conv.state = "awaiting_reply"
        return [reply]
    provenance = Told(message.sender, conv.id, _iso(message.timestamp))
    for stmt in statements:
        assert_statement(ctx.kb, stmt, provenance)
    missing = _missing_slots(statements, ctx)
    if missing:
        reply = ctx.message(
            conv,
            ctx.agent_id,
            MessageKind.ASK,
            {
                "missing": missing,
                "text": "; ".join(
                    f"{subject} is missing {', '.join(props)}"
                    for subject, props in missing.items()
                ),
            },
            in_reply_to=message.id,
        )
        conv.transcript.append(reply)
        conv.state = "awaiting_reply"
        return [reply]
    conv.state = "closed"
    return []


def _missing_slots(statements, ctx: ProtocolContext) -> dict[str, list[str]]:
    missing: dict[str, list[str]] = {}
    for stmt in statements:
        if isinstance(stmt, ce.Because):
            continue
        wanted: list[str] = []
        for concept in sorted(ctx.kb.instance_types(stmt.id) if stmt.id in ctx.kb.instances else {stmt.concept}):
            wanted += ctx.mandatory_slots.get(concept, [])
        absent = []
        for prop in dict.fromkeys(wanted):
            if not ctx.kb.query(Pattern(subject=stmt.id, property=prop)):
                absent.append(prop)
        if absent:
            missing[stmt.id] = absent
    return missing


def _pattern_from_body(body: dict) -> Pattern:
    return Pattern(
        subject=body.get("subject"),
        property=body.get("property"),
        object=body.get("object"),
        concept=body.get("concept"),
    )


# ----------------------------------------------------------------------
# gist/expand


def step_gist_expand(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    if message.kind == MessageKind.EXPAND_REQUEST and conv.state == "gist_open":
        gist_id = message.body.get("gist_id", "")
        try:
            ce_text = ctx.gist_store.ce_text(gist_id)
        except UnknownIdError as err:
            raise ProtocolError(str(err)) from err
        conv.transcript.append(message)
        reply = ctx.message(
            conv,
            ctx.agent_id,
            MessageKind.EXPAND,
            {"ce": ce_text, "gist_id": gist_id},
            in_reply_to=message.id,
        )
        conv.transcript.append(reply)
        return [reply]
    raise ProtocolError(
        f"{message.kind.value} is not legal in gist/expand state '{conv.state}'"
    )


def send_gist(
    conv: Conversation,
    statements,
    ctx: ProtocolContext,
    audience: tuple[str, ...] | None = None,
    context: gisting.GistContext | None = None,
) -> Message:
    """Agent-side helper: render statements and record the gist message
    in an open gist/expand interaction."""
    descriptor = gisting.gist(
        statements, ctx.templates, context or ctx.gist_context, ctx.gist_store
    )
    message = ctx.message(
        conv,
        ctx.agent_id,
        MessageKind.GIST,
        {
            "gist": asdict(descriptor),
            "gist_id": descriptor.source_ids[0] if descriptor.source_ids else None,
            "text": descriptor.text,
        },
        audience=audience,
    )
    conv.transcript.append(message)
    conv.state = "gist_open"
    return message


# ----------------------------------------------------------------------
# why


def step_why(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    if conv.state == "opened" and message.kind == MessageKind.WHY:
        if not (conv.transcript and conv.transcript[-1] is message):
            conv.transcript.append(message)
        return _answer_why(conv, message, ctx)
    raise ProtocolError(
        f"{message.kind.value} is not legal in why state '{conv.state}'"
    )


def _answer_why(conv: Conversation, message: Message, ctx: ProtocolContext) -> list[Message]:
    about = message.body.get("about", "")
    try:
        rationale = fusion.rationale(ctx.kb, about)
    except UnknownIdError as err:
        raise ProtocolError(str(err)) from err
    reply = ctx.message(
        conv,
        ctx.agent_id,
        MessageKind.BECAUSE,
        {"ce": rationale.text, "about": about, "rule": rationale.rule},
        in_reply_to=message.id,
    )
    conv.transcript.append(reply)
    conv.state = "closed"
    return [reply]


# ----------------------------------------------------------------------


def _iso(timestamp: float) -> str:
    from datetime import datetime, timezone

    return datetime.fromtimestamp(timestamp, tz=timezone.utc).isoformat()


def replay(
    messages: list[Message], ctx: ProtocolContext, agent_id: str = "moira"
) -> dict[str, Conversation]:
    """Re-run the inbound half of a transcript against a fresh context;
    produces the same final KB state (timestamps aside)."""
    conversations: dict[str, Conversation] = {}
    for message in messages:
        if message.sender == agent_id:
            continue  # agent replies are regenerated
        conv = conversations.get(message.conversation)
        if conv is None:
            interaction = OPENERS.get(message.kind)
            if interaction is None:
                raise ProtocolError(f"transcript starts with {message.kind.value}")
            conv = start_conversation(message.sender, interaction, message, agent_id)
            conversations[conv.id] = conv
            process(conv, message, ctx)
        else:
            deliver(conv, message, ctx)
    return conversations
