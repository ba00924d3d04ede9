import pytest

from cetalk import ce, fusion, protocol
from cetalk.kernel import Pattern
from cetalk.protocol import Interaction, Message, MessageKind, ProtocolError

from .conftest import SPOT_REPORT, USE_CASE_PREMISES

ALL_KINDS = list(MessageKind)


def make_message(ctx, conv_id, kind, body=None, sender="user"):
    return Message(
        id=ctx.next_id(),
        conversation=conv_id,
        sender=sender,
        audience=(sender, "moira"),
        kind=kind,
        body=body or {},
        timestamp=ctx.clock(),
    )


def open_confirm(ctx, text=SPOT_REPORT, conv_id="c1"):
    message = make_message(ctx, conv_id, MessageKind.NL_INPUT, {"text": text})
    conv = protocol.start_conversation("user", Interaction.CONFIRM, message)
    replies = protocol.process(conv, message, ctx)
    return conv, replies


class TestStart:
    def test_confirm_start(self, ctx_factory):
        ctx = ctx_factory()
        conv, replies = open_confirm(ctx)
        assert conv.interaction == Interaction.CONFIRM
        assert replies[0].kind == MessageKind.CE_CONFIRM_REQUEST

    def test_ask_tell_start(self, ctx_factory):
        ctx = ctx_factory(USE_CASE_PREMISES)
        message = make_message(ctx, "c2", MessageKind.ASK, {"concept": "person"})
        conv = protocol.start_conversation("analyst", Interaction.ASK_TELL, message)
        replies = protocol.process(conv, message, ctx)
        assert replies[0].kind == MessageKind.TELL

    def test_why_start_rejected(self, ctx_factory):
        ctx = ctx_factory()
        message = make_message(ctx, "c3", MessageKind.WHY, {"about": "x"})
        with pytest.raises(ProtocolError):
            protocol.start_conversation("user", Interaction.WHY, message)

    def test_kind_must_match_interaction(self, ctx_factory):
        ctx = ctx_factory()
        message = make_message(ctx, "c4", MessageKind.ASK, {})
        with pytest.raises(ProtocolError):
            protocol.start_conversation("user", Interaction.CONFIRM, message)

    def test_first_message_never_why_or_because(self, ctx_factory):
        ctx = ctx_factory()
        for kind in (MessageKind.WHY, MessageKind.BECAUSE):
            message = make_message(ctx, "c5", kind, {})
            for interaction in Interaction:
                with pytest.raises(ProtocolError):
                    protocol.start_conversation("user", interaction, message)


class TestConfirm:
    def test_request_carries_ce_gist_score(self, ctx_factory):
        ctx = ctx_factory()
        _, replies = open_confirm(ctx)
        body = replies[0].body
        assert body["score"] == 6
        assert "there is a vehicle named v1" in body["ce"]
        assert body["gist"]["text"]
        assert "Suspicious" in body["unmatched_words"]

    def test_no_kb_mutation_before_accept(self, ctx_factory):
        ctx = ctx_factory()
        facts_before = len(ctx.kb.facts)
        instances_before = set(ctx.kb.instances)
        conv, replies = open_confirm(ctx)
        message = make_message(
            ctx, conv.id, MessageKind.CONFIRM_CORRECT, {"text": "blue not black"}
        )
        protocol.deliver(conv, message, ctx)
        assert len(ctx.kb.facts) == facts_before
        assert set(ctx.kb.instances) == instances_before

    def test_accept_asserts_with_told_provenance(self, ctx_factory):
        ctx = ctx_factory()
        conv, replies = open_confirm(ctx)
        accept = make_message(ctx, conv.id, MessageKind.CONFIRM_ACCEPT, {})
        protocol.deliver(conv, accept, ctx)
        found = ctx.kb.query(Pattern(property="registration", object="DEF456"))
        assert len(found) == 1
        assert found[0].provenance.source == "user"
        assert conv.state == "closed"

    def test_correct_replaces_pending(self, ctx_factory):
        ctx = ctx_factory()
        conv, _ = open_confirm(ctx)
        correct = make_message(
            ctx, conv.id, MessageKind.CONFIRM_CORRECT,
            {"text": "it's a truck not a saloon"},
        )
        replies = protocol.deliver(conv, correct, ctx)
        assert "vehicle body type truck" in replies[0].body["ce"]
        assert "saloon" not in replies[0].body["ce"]
        accept = make_message(ctx, conv.id, MessageKind.CONFIRM_ACCEPT, {})
        protocol.deliver(conv, accept, ctx)
        body_types = ctx.kb.query(Pattern(property="body type"))
        assert [f.object for f in body_types] == ["truck"]

    def test_correct_with_edited_ce(self, ctx_factory):
        ctx = ctx_factory()
        conv, _ = open_confirm(ctx)
        edited = "there is a vehicle named v9 that has ZZ99 as registration."
        correct = make_message(
            ctx, conv.id, MessageKind.CONFIRM_CORRECT, {"ce": edited}
        )
        replies = protocol.deliver(conv, correct, ctx)
        assert replies[0].body["ce"] == edited

    def test_correct_with_bad_ce_keeps_state(self, ctx_factory):
        ctx = ctx_factory()
        conv, _ = open_confirm(ctx)
        before = conv.pending
        correct = make_message(
            ctx, conv.id, MessageKind.CONFIRM_CORRECT, {"ce": "the colour black has X as registration."}
        )
        with pytest.raises(Exception):
            protocol.deliver(conv, correct, ctx)
        assert conv.pending is before

    def test_accept_without_pending(self, ctx_factory):
        ctx = ctx_factory()
        message = make_message(ctx, "c9", MessageKind.NL_INPUT, {"text": "red car"})
        conv = protocol.start_conversation("user", Interaction.CONFIRM, message)
        # accept before the confirm request exists
        accept = make_message(ctx, conv.id, MessageKind.CONFIRM_ACCEPT, {})
        with pytest.raises(ProtocolError):
            protocol.step_confirm(conv, accept, ctx)


class TestAskTell:
    def test_ask_answers_with_facts(self, ctx_factory):
        ctx = ctx_factory(USE_CASE_PREMISES)
        fusion.run_rules(ctx.kb, ctx.rules)
        message = make_message(ctx, "c1", MessageKind.ASK, {"concept": "suspect sighting"})
        conv = protocol.start_conversation("analyst", Interaction.ASK_TELL, message)
        replies = protocol.process(conv, message, ctx)
        assert "there is a suspect sighting named SS_v48" in replies[0].body["ce"]
        assert replies[0].body["empty"] is False

    def test_ask_matching_nothing(self, ctx_factory):
        ctx = ctx_factory()
        message = make_message(ctx, "c1", MessageKind.ASK, {"concept": "task"})
        conv = protocol.start_conversation("analyst", Interaction.ASK_TELL, message)
        replies = protocol.process(conv, message, ctx)
        assert replies[0].body["empty"] is True

    def test_tell_asserts_and_counter_asks(self, ctx_factory):
        ctx = ctx_factory()
        tell_ce = "there is a vehicle named v5 that has the colour red as colour."
        message = make_message(
            ctx, "c1", MessageKind.TELL, {"ce": tell_ce}, sender="scout"
        )
        conv = protocol.start_conversation("scout", Interaction.ASK_TELL, message)
        replies = protocol.process(conv, message, ctx)
        assert ctx.kb.query(Pattern(subject="v5"))
        assert replies[0].kind == MessageKind.ASK
        assert replies[0].body["missing"] == {
            "v5": ["registration", "direction of travel"]
        }
        assert conv.state == "awaiting_reply"
        followup = make_message(
            ctx,
            conv.id,
            MessageKind.TELL,
            {
                "ce": "the vehicle v5 has RED12 as registration and is a moving thing.\n"
                "there is a moving thing named v5 that has the direction north as direction of travel."
            },
            sender="scout",
        )
        replies = protocol.deliver(conv, followup, ctx)
        assert replies == []
        assert conv.state == "closed"

    def test_malformed_tell_keeps_conversation_open(self, ctx_factory):
        ctx = ctx_factory()
        message = make_message(ctx, "c1", MessageKind.TELL, {"ce": "there is a."}, sender="scout")
        conv = protocol.start_conversation("scout", Interaction.ASK_TELL, message)
        replies = protocol.process(conv, message, ctx)
        assert "error" in replies[0].body
        assert conv.state == "awaiting_reply"

    def test_unauthorized_tell_not_asserted(self, ctx_factory):
        ctx = ctx_factory(authorized_sources=frozenset({"trusted"}))
        message = make_message(
            ctx, "c1", MessageKind.TELL,
            {"ce": "there is a vehicle named v6 that has X as registration."},
            sender="rando",
        )
        conv = protocol.start_conversation("rando", Interaction.ASK_TELL, message)
        protocol.process(conv, message, ctx)
        assert "v6" not in ctx.kb.instances


class TestGistExpand:
    def test_expand_is_byte_identical(self, ctx_factory):
        ctx = ctx_factory()
        conv = protocol.Conversation("c1", ("user", "moira"))
        conv.interaction = Interaction.GIST_EXPAND
        statements = [ce.parse_statement("there is a colour named mauve.")]
        gist_msg = protocol.send_gist(conv, statements, ctx)
        source_ce = ctx.gist_store.ce_text(gist_msg.body["gist_id"])
        request = make_message(
            ctx, conv.id, MessageKind.EXPAND_REQUEST, {"gist_id": gist_msg.body["gist_id"]}
        )
        replies = protocol.deliver(conv, request, ctx)
        assert replies[0].kind == MessageKind.EXPAND
        assert replies[0].body["ce"] == source_ce

    def test_expand_unknown_gist(self, ctx_factory):
        ctx = ctx_factory()
        conv = protocol.Conversation("c1", ("user", "moira"))
        conv.interaction = Interaction.GIST_EXPAND
        protocol.send_gist(conv, [ce.parse_statement("there is a colour named mauve.")], ctx)
        transcript_before = list(conv.transcript)
        request = make_message(ctx, conv.id, MessageKind.EXPAND_REQUEST, {"gist_id": "g404"})
        with pytest.raises(ProtocolError):
            protocol.deliver(conv, request, ctx)
        assert conv.transcript == transcript_before


class TestWhy:
    def test_why_inferred(self, ctx_factory):
        ctx = ctx_factory(USE_CASE_PREMISES)
        fusion.run_rules(ctx.kb, ctx.rules)
        ask = make_message(ctx, "c1", MessageKind.ASK, {"concept": "suspect sighting"})
        conv = protocol.start_conversation("analyst", Interaction.ASK_TELL, ask)
        protocol.process(conv, ask, ctx)
        why = make_message(ctx, conv.id, MessageKind.WHY, {"about": "SS_v48"})
        replies = protocol.deliver(conv, why, ctx)
        assert replies[0].kind == MessageKind.BECAUSE
        assert "because there is a person named p1" in replies[0].body["ce"]

    def test_why_unknown_fact(self, ctx_factory):
        ctx = ctx_factory(USE_CASE_PREMISES)
        ask = make_message(ctx, "c1", MessageKind.ASK, {"concept": "person"})
        conv = protocol.start_conversation("analyst", Interaction.ASK_TELL, ask)
        protocol.process(conv, ask, ctx)
        why = make_message(ctx, conv.id, MessageKind.WHY, {"about": "ghost"})
        with pytest.raises(ProtocolError):
            protocol.deliver(conv, why, ctx)


class TestFlow:
    def test_confirm_then_ask_tell_allowed(self, ctx_factory):
        ctx = ctx_factory()
        conv, _ = open_confirm(ctx)
        protocol.deliver(conv, make_message(ctx, conv.id, MessageKind.CONFIRM_ACCEPT, {}), ctx)
        ask = make_message(ctx, conv.id, MessageKind.ASK, {"concept": "vehicle"})
        replies = protocol.deliver(conv, ask, ctx)
        assert replies[0].kind == MessageKind.TELL

    def test_confirm_then_gist_rejected(self, ctx_factory):
        ctx = ctx_factory()
        conv, _ = open_confirm(ctx)
        protocol.deliver(conv, make_message(ctx, conv.id, MessageKind.CONFIRM_ACCEPT, {}), ctx)
        gist_msg = make_message(ctx, conv.id, MessageKind.GIST, {})
        with pytest.raises(ProtocolError):
            protocol.deliver(conv, gist_msg, ctx)

    def test_why_then_ask_tell_only(self, ctx_factory):
        ctx = ctx_factory(USE_CASE_PREMISES)
        fusion.run_rules(ctx.kb, ctx.rules)
        ask = make_message(ctx, "c1", MessageKind.ASK, {"concept": "suspect sighting"})
        conv = protocol.start_conversation("analyst", Interaction.ASK_TELL, ask)
        protocol.process(conv, ask, ctx)
        protocol.deliver(conv, make_message(ctx, conv.id, MessageKind.WHY, {"about": "SS_v48"}), ctx)
        nl = make_message(ctx, conv.id, MessageKind.NL_INPUT, {"text": "red car"})
        with pytest.raises(ProtocolError):
            protocol.deliver(conv, nl, ctx)
        ask2 = make_message(ctx, conv.id, MessageKind.ASK, {"concept": "vehicle"})
        assert protocol.deliver(conv, ask2, ctx)


class TestTranscript:
    def test_append_only_and_replayable(self, ctx_factory):
        ctx = ctx_factory(USE_CASE_PREMISES)
        conv, _ = open_confirm(ctx)
        protocol.deliver(
            conv,
            make_message(ctx, conv.id, MessageKind.CONFIRM_CORRECT, {"text": "it's a truck not a saloon"}),
            ctx,
        )
        protocol.deliver(conv, make_message(ctx, conv.id, MessageKind.CONFIRM_ACCEPT, {}), ctx)
        ids = [m.id for m in conv.transcript]
        assert ids == sorted(ids, key=lambda x: int(x[1:]))
        # replay the inbound half against a fresh KB
        fresh_ctx = ctx_factory(USE_CASE_PREMISES)
        protocol.replay(conv.transcript, fresh_ctx)
        original = {f.triple for f in ctx.kb.facts}
        replayed = {f.triple for f in fresh_ctx.kb.facts}
        assert original == replayed


# ----------------------------------------------------------------------
# exhaustive state-space enumeration


def test_model_check_depth_six(ctx_factory):
    """Walk every message-kind sequence to depth 6 (memoizing identical
    protocol states): each step either transitions or raises
    ProtocolError leaving the state signature intact; nothing else."""
    bodies = {
        MessageKind.NL_INPUT: {"text": "red truck going north"},
        MessageKind.CE_CONFIRM_REQUEST: {},
        MessageKind.CONFIRM_ACCEPT: {},
        MessageKind.CONFIRM_CORRECT: {"text": "blue not red"},
        MessageKind.ASK: {"concept": "vehicle"},
        MessageKind.TELL: {"ce": "there is a colour named mauve."},
        MessageKind.GIST: {"text": "hello"},
        MessageKind.EXPAND_REQUEST: {"gist_id": "g1"},
        MessageKind.EXPAND: {},
        MessageKind.WHY: {"about": "f1"},
        MessageKind.BECAUSE: {},
    }

    def signature(conv):
        return (
            conv.interaction,
            conv.state,
            conv.pending is not None,
            len(conv.transcript) > 0,
        )

    import copy

    visited: set = set()
    transitions = 0

    def explore(conv, ctx, depth):
        nonlocal transitions
        key = (signature(conv), depth)
        if key in visited:
            return
        visited.add(key)
        if depth == 0:
            return
        for kind in ALL_KINDS:
            trial = copy.deepcopy(conv)
            before = signature(trial)
            message = make_message(ctx, trial.id, kind, dict(bodies[kind]))
            try:
                protocol.deliver(trial, message, ctx)
            except ProtocolError:
                assert signature(trial) == before, (kind, before)
                continue
            transitions += 1
            explore(trial, ctx, depth - 1)

    for opener in ALL_KINDS:
        ctx = ctx_factory(
            "there is a vehicle named v48 that has DEF456 as registration.",
            provenance=None,
        )
        ctx.gist_store.register("there is a colour named mauve.")
        interaction = protocol.OPENERS.get(opener)
        message = make_message(ctx, "c1", opener, dict(bodies[opener]))
        if interaction is None:
            continue  # cannot open a conversation at all
        try:
            conv = protocol.start_conversation("user", interaction, message)
        except ProtocolError:
            assert interaction == Interaction.WHY
            continue
        protocol.process(conv, message, ctx)
        explore(conv, ctx, 6)

    assert transitions > 20  # the legal graph is genuinely explored
