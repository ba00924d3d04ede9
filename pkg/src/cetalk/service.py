"""Agent service: Moira (conversation mediation) and Sam (tasking)
behind an HTTP + WebSocket API.

The transport-free core is AgentService: sessions post messages, Moira
runs the conversation protocol against the shared KB, and every accept
or machine tell cascades through the fusion rules, subscription
deliveries and Sam's task matchmaking.  create_app wraps the core in
FastAPI endpoints; the CLI REPL drives the same core directly.

Visibility: each message carries an audience of session and agent ids.
Machine-machine exchanges add sessions whose role is configured as an
observer, which is what a chat client renders as the grey lane.
"""

from __future__ import annotations

import asyncio
import itertools
import time
from dataclasses import asdict, dataclass, field

from fastapi import Body, FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from . import ce, fusion, gist as gisting, persist, protocol, tasking
from .kernel import (
    CeError,
    KnowledgeBase,
    Pattern,
    Told,
    facts_to_statements,
    assert_statement,
    load_ce,
)

FUSION_AGENT = "fusion"
SAM_AGENT = "sam"
MOIRA_AGENT = "moira"


class ServiceError(CeError):
    pass


@dataclass
class ServiceConfig:
    model_text: str = ""
    rules_text: str = ""
    templates_text: str = ""
    catalogue_text: str = ""
    kb_path: str | None = None
    roles: tuple[str, ...] = ("patrol", "analyst", "admin")
    observer_roles: tuple[str, ...] = ("patrol", "analyst", "admin")
    authorizer_role: str = "analyst"
    subscribed_roles: tuple[str, ...] = ("analyst",)
    subscription_concept: str = "suspect sighting"
    trigger_concept: str = "suspect sighting"
    mandatory_slots: dict[str, list[str]] = field(
        default_factory=lambda: {"vehicle": ["registration", "direction of travel"]}
    )
    tasking: tasking.TaskingConfig = field(default_factory=tasking.TaskingConfig)


@dataclass
class Session:
    id: str
    user: str
    role: str
    device: str = "phone"
    area: str | None = None
    conversations: list[str] = field(default_factory=list)
    score: int = 0

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "user": self.user,
            "role": self.role,
            "device": self.device,
            "area": self.area,
            "conversations": list(self.conversations),
            "score": self.score,
        }


@dataclass
class AgentRegistry:
    """Addressable agents and which handler owns them."""

    handlers: dict[str, str] = field(
        default_factory=lambda: {
            MOIRA_AGENT: "conversation",
            SAM_AGENT: "tasking",
            FUSION_AGENT: "fusion",
        }
    )

    def known(self, agent_id: str) -> bool:
        return agent_id in self.handlers


class AgentService:
    """In-memory service state: KB, sessions, conversations, catalogue."""

    def __init__(self, config: ServiceConfig, clock=time.time):
        self.config = config
        restored = self._restore_kb(config)
        if restored is not None:
            self.kb = restored
        else:
            self.kb = KnowledgeBase()
            if config.model_text:
                load_ce(self.kb, config.model_text)
            if config.catalogue_text:
                load_ce(self.kb, config.catalogue_text)
        self.rules = fusion.parse_rules(config.rules_text) if config.rules_text else []
        templates = (
            gisting.parse_templates(config.templates_text)
            if config.templates_text
            else []
        )
        self.ctx = protocol.ProtocolContext(
            kb=self.kb,
            templates=templates,
            rules=self.rules,
            mandatory_slots=dict(config.mandatory_slots),
            agent_id=MOIRA_AGENT,
            clock=clock,
        )
        self.catalogue = tasking.Catalogue.from_kb(self.kb)
        self.registry = AgentRegistry()
        self.subscriptions = fusion.SubscriptionManager()
        self.sessions: dict[str, Session] = {}
        self.conversations: dict[str, protocol.Conversation] = {}
        self.session_log: dict[str, list[protocol.Message]] = {}
        self._authorizations: dict[str, dict] = {}
        self._session_seq = itertools.count(1)
        self._conv_seq = itertools.count(1)
        self._listeners: list = []  # callables fed every emitted message

    @staticmethod
    def _restore_kb(config: ServiceConfig):
        """A previously persisted KB at kb_path wins over fresh model
        text, so restarts keep their facts."""
        if not config.kb_path:
            return None
        import os

        if not os.path.exists(config.kb_path):
            return None
        return persist.restore(config.kb_path)

    # ------------------------------------------------------------------
    # sessions

    def create_session(
        self, user: str, role: str, device: str = "phone", area: str | None = None
    ) -> Session:
        if role not in self.config.roles:
            raise ServiceError(f"unknown role '{role}'")
        session = Session(f"s{next(self._session_seq)}", user, role, device, area)
        self.sessions[session.id] = session
        self.session_log[session.id] = []
        if role in self.config.subscribed_roles:
            _, existing = self.subscriptions.subscribe(
                self.kb, Pattern(concept=self.config.subscription_concept), session.id
            )
            if existing:
                conv = self._machine_conversation(session.id, FUSION_AGENT)
                self._emit_tell(conv, existing, to_session=session.id)
        return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise ServiceError(f"unknown session '{session_id}'")
        return session

    def sessions_by_role(self, role: str) -> list[Session]:
        return [s for s in self.sessions.values() if s.role == role]

    def _observers(self) -> tuple[str, ...]:
        return tuple(
            s.id for s in self.sessions.values() if s.role in self.config.observer_roles
        )

    # ------------------------------------------------------------------
    # message flow

    def post_message(self, session_id: str, body: dict) -> list[protocol.Message]:
        """Route one client message; returns every message newly visible
        to this session (the caller also sees them via listeners)."""
        session = self.get_session(session_id)
        kind = self._kind(body.get("kind", ""))
        conv_id = body.get("conversation")
        payload = {
            k: v
            for k, v in body.items()
            if k not in ("kind", "conversation", "in_reply_to")
        }
        message_body = dict(payload)
        before = len(self.session_log[session.id])
        with self.kb.lock:
            # confirm gists adapt to who is looking and on what device
            self.ctx.gist_context = gisting.GistContext(session.role, session.device)
            if conv_id is None:
                conv, message = self._open_conversation(session, kind, message_body, body)
                outgoing = protocol.process(conv, message, self.ctx)
            else:
                conv = self.conversations.get(conv_id)
                if conv is None:
                    raise ServiceError(f"unknown conversation '{conv_id}'")
                message = self.ctx.message(
                    conv, session.user, kind, message_body,
                    in_reply_to=body.get("in_reply_to"),
                )
                if conv.id in self._authorizations:
                    outgoing = self._step_authorization(conv, message, session)
                else:
                    outgoing = protocol.deliver(conv, message, self.ctx)
            self._record(message)
            for reply in outgoing:
                self._record(reply)
            if (
                kind == protocol.MessageKind.CONFIRM_ACCEPT
                and conv.id not in self._authorizations
                and conv.state == "closed"
            ):
                session.score += conv.pending.score if conv.pending else 0
                self._attach_session_area(session, conv)
                self._cascade()
            elif kind == protocol.MessageKind.TELL:
                self._cascade()
        return self.session_log[session.id][before:]

    def _kind(self, raw: str) -> protocol.MessageKind:
        try:
            return protocol.MessageKind(raw)
        except ValueError:
            raise ServiceError(f"unknown message kind '{raw}'") from None

    def _open_conversation(self, session, kind, message_body, body):
        interaction = protocol.OPENERS.get(kind)
        if interaction is None:
            raise ServiceError(
                f"{kind.value} cannot open a conversation; pass a conversation id"
            )
        conv_id = f"c{next(self._conv_seq)}"
        message = protocol.Message(
            id=self.ctx.next_id(),
            conversation=conv_id,
            sender=session.user,
            audience=(session.id, MOIRA_AGENT),
            kind=kind,
            body=message_body,
            in_reply_to=body.get("in_reply_to"),
            timestamp=self.ctx.clock(),
        )
        conv = protocol.start_conversation(session.id, interaction, message, MOIRA_AGENT)
        self.conversations[conv.id] = conv
        session.conversations.append(conv.id)
        return conv, message

    def _record(self, message: protocol.Message) -> None:
        for target in message.audience:
            if target not in self.sessions and not self.registry.known(target):
                raise ServiceError(f"audience member '{target}' is not addressable")
        for target in message.audience:
            log = self.session_log.get(target)
            if log is not None:
                log.append(message)
        for listener in self._listeners:
            listener(message)

    def add_listener(self, listener) -> None:
        self._listeners.append(listener)

    def remove_listener(self, listener) -> None:
        if listener in self._listeners:
            self._listeners.remove(listener)

    # ------------------------------------------------------------------
    # context enrichment and the fusion/tasking cascade

    def _attach_session_area(self, session: Session, conv: protocol.Conversation) -> None:
        """Device location: newly confirmed instances with a last-known-
        area property get the session's area as a told fact."""
        if not session.area or not conv.pending:
            return
        provenance = Told(session.user, conv.id)
        if session.area not in self.kb.instances:
            assert_statement(
                self.kb, ce.NewInstance("spatial area", session.area), provenance
            )
        for info in conv.pending.new_instances:
            for pdef in self.kb.properties_of(info.concept):
                if pdef.name == "last known area":
                    self.kb.assert_fact(info.id, pdef, session.area, provenance)
                    break

    def _machine_conversation(self, *participants: str) -> protocol.Conversation:
        conv_id = f"c{next(self._conv_seq)}"
        conv = protocol.Conversation(
            id=conv_id, participants=tuple(dict.fromkeys(participants))
        )
        conv.interaction = protocol.Interaction.ASK_TELL
        conv.state = "opened"
        self.conversations[conv_id] = conv
        return conv

    def _emit_tell(self, conv, facts, to_session: str) -> protocol.Message:
        statements = facts_to_statements(self.kb, list(facts))
        # audience order carries addressing: recipients, then the agent
        # marker, then mere observers (rendered as the grey lane)
        message = protocol.Message(
            id=self.ctx.next_id(),
            conversation=conv.id,
            sender=FUSION_AGENT,
            audience=tuple(dict.fromkeys((to_session, FUSION_AGENT, *self._observers()))),
            kind=protocol.MessageKind.TELL,
            body={"ce": ce.render_statements(statements)},
            timestamp=self.ctx.clock(),
        )
        conv.transcript.append(message)
        conv.state = "closed"
        self._record(message)
        return message

    def _cascade(self) -> None:
        result = fusion.run_rules(self.kb, self.rules)
        if not result.new_facts:
            return
        for sub, facts in self.subscriptions.deliveries(self.kb, result.new_facts):
            conv = self._machine_conversation(sub.subscriber, FUSION_AGENT)
            self._emit_tell(conv, facts, to_session=sub.subscriber)
        triggers = []
        for fact in result.new_facts:
            subject = fact.subject
            if subject in triggers or subject not in self.kb.instances:
                continue
            if self.config.trigger_concept in self.kb.instance_types(subject):
                triggers.append(subject)
        priorities = {p: i for i, p in enumerate(tasking.PRIORITIES)}
        tasks = [
            tasking.build_task(t, self.kb, self.config.tasking) for t in triggers
        ]
        tasks.sort(key=lambda t: -priorities.get(t.priority, 0))
        for task in tasks:
            self._run_task(task)

    def _run_task(self, task: tasking.Task) -> None:
        stmt = tasking.task_statement(task)
        with_sam = Told(SAM_AGENT)
        assert_statement(self.kb, stmt, with_sam)
        # the Moira/Sam exchange is machine-machine CE, observable as grey
        conv = self._machine_conversation(MOIRA_AGENT, SAM_AGENT)
        message = protocol.Message(
            id=self.ctx.next_id(),
            conversation=conv.id,
            sender=SAM_AGENT,
            audience=tuple(dict.fromkeys((MOIRA_AGENT, *self._observers()))),
            kind=protocol.MessageKind.TELL,
            body={"ce": ce.render_statement(stmt)},
            timestamp=self.ctx.clock(),
        )
        conv.transcript.append(message)
        conv.state = "closed"
        self._record(message)
        ranked = tasking.match_assets(task, self.catalogue)
        if not ranked:
            self._notify_roles(
                [self.config.authorizer_role],
                [stmt],
                text_override=f"No available asset qualifies for task {task.id}.",
            )
            return
        if self.config.tasking.mode_for(task.priority) == "auto":
            self._assign(task, ranked[0])
        else:
            self._request_authorization(task, ranked)

    def _assign(self, task: tasking.Task, asset: tasking.Asset) -> None:
        if not self.catalogue.mark_tasked(asset.id):
            remaining = tasking.match_assets(task, self.catalogue)
            if not remaining:
                return
            asset = remaining[0]
            self.catalogue.mark_tasked(asset.id)
        assignment = ce.InstanceFacts(
            "task", task.id, (ce.PropertyClause("is assigned", ce.InstanceRef("asset", asset.id), True),)
        )
        assert_statement(self.kb, assignment, Told(SAM_AGENT))
        note = tasking.notification_statement(task, asset, self.kb)
        self._notify_roles([self.config.authorizer_role], [note])
        self._notify_roles(["patrol"], [note], role_context="patrol")

    def _notify_roles(
        self,
        roles: list[str],
        statements,
        role_context: str | None = None,
        text_override: str | None = None,
    ) -> None:
        targets = [s for role in roles for s in self.sessions_by_role(role)]
        if not targets:
            return
        audience = tuple(
            dict.fromkeys([s.id for s in targets] + [SAM_AGENT] + list(self._observers()))
        )
        conv = self._machine_conversation(*audience)
        conv.interaction = protocol.Interaction.GIST_EXPAND
        context = gisting.GistContext(
            role=role_context or roles[0], device=targets[0].device
        )
        descriptor = gisting.gist(
            statements, self.ctx.templates, context, self.ctx.gist_store
        )
        text = text_override or descriptor.text
        message = protocol.Message(
            id=self.ctx.next_id(),
            conversation=conv.id,
            sender=SAM_AGENT,
            audience=audience,
            kind=protocol.MessageKind.GIST,
            body={
                "gist": {**asdict(descriptor), "text": text},
                "gist_id": descriptor.source_ids[0] if descriptor.source_ids else None,
                "text": text,
            },
            timestamp=self.ctx.clock(),
        )
        conv.transcript.append(message)
        conv.state = "gist_open"
        self._record(message)

    # ------------------------------------------------------------------
    # authorization (confirm-style, machine initiated)

    def _request_authorization(self, task: tasking.Task, ranked: list[tasking.Asset]) -> None:
        authorizers = self.sessions_by_role(self.config.authorizer_role)
        if not authorizers:
            self._assign(task, ranked[0])  # nobody to ask; fall back to auto
            return
        conv_id = f"c{next(self._conv_seq)}"
        audience = tuple(dict.fromkeys([s.id for s in authorizers] + [SAM_AGENT]))
        conv = protocol.Conversation(id=conv_id, participants=audience)
        conv.interaction = protocol.Interaction.CONFIRM
        conv.state = "awaiting_decision"
        self.conversations[conv_id] = conv
        self._authorizations[conv_id] = {"task": task, "ranked": ranked, "index": 0}
        self._send_authorization_request(conv, task, ranked[0])

    def _send_authorization_request(self, conv, task, asset) -> None:
        note = tasking.notification_statement(task, asset, self.kb)
        descriptor = gisting.gist(
            [note],
            self.ctx.templates,
            gisting.GistContext(role=self.config.authorizer_role),
            self.ctx.gist_store,
        )
        assignment = ce.InstanceFacts(
            "task", task.id, (ce.PropertyClause("is assigned", ce.InstanceRef("asset", asset.id), True),)
        )
        conv.pending = protocol.PendingCe([assignment])
        message = protocol.Message(
            id=self.ctx.next_id(),
            conversation=conv.id,
            sender=SAM_AGENT,
            audience=conv.participants,
            kind=protocol.MessageKind.CE_CONFIRM_REQUEST,
            body={
                "ce": ce.render_statement(assignment),
                "gist": asdict(descriptor),
                "text": f"Authorise: {descriptor.text}",
                "asset": asset.id,
                "score": 0,
            },
            timestamp=self.ctx.clock(),
        )
        conv.transcript.append(message)
        self._record(message)

    def _step_authorization(self, conv, message, session) -> list[protocol.Message]:
        auth = self._authorizations[conv.id]
        if conv.state != "awaiting_decision":
            raise protocol.ProtocolError("authorization already resolved")
        if message.kind == protocol.MessageKind.CONFIRM_ACCEPT:
            conv.transcript.append(message)
            task, ranked, index = auth["task"], auth["ranked"], auth["index"]
            asset = ranked[index]
            if not self.catalogue.mark_tasked(asset.id):
                # the asset went away while the human decided: re-match
                remaining = tasking.match_assets(task, self.catalogue)
                if remaining:
                    auth["ranked"], auth["index"] = remaining, 0
                    self._send_authorization_request(conv, task, remaining[0])
                    return []
                conv.state = "closed"
                return []
            assert_statement(self.kb, conv.pending.statements[0], Told(session.user, conv.id))
            conv.state = "closed"
            note = tasking.notification_statement(task, asset, self.kb)
            self._notify_roles(["patrol"], [note], role_context="patrol")
            return []
        if message.kind == protocol.MessageKind.CONFIRM_CORRECT:
            conv.transcript.append(message)
            auth["index"] += 1
            task, ranked = auth["task"], auth["ranked"]
            if auth["index"] < len(ranked):
                self._send_authorization_request(conv, task, ranked[auth["index"]])
            else:
                conv.state = "closed"
            return []
        raise protocol.ProtocolError(
            f"{message.kind.value} is not legal in an authorization exchange"
        )

    # ------------------------------------------------------------------
    # KB endpoints

    def query_facts(self, **bounds) -> dict:
        pattern = Pattern(
            subject=bounds.get("subject"),
            property=bounds.get("property"),
            object=bounds.get("object"),
            concept=bounds.get("concept"),
        )
        facts = self.kb.query(pattern)
        statements = facts_to_statements(self.kb, facts)
        return {
            "facts": [
                {
                    "id": f.id,
                    "subject": f.subject,
                    "property": f.property,
                    "object": f.object,
                }
                for f in facts
            ],
            "ce": ce.render_statements(statements),
        }

    def upload_model(self, text: str) -> dict:
        with self.kb.lock:
            load_ce(self.kb, text)
            self.catalogue = tasking.Catalogue.from_kb(self.kb)
        return {
            "concepts": len(self.kb.concepts),
            "properties": len(self.kb.properties),
            "instances": len(self.kb.instances),
        }

    def save(self) -> None:
        if self.config.kb_path:
            persist.persist(self.kb, self.config.kb_path)


# ----------------------------------------------------------------------
# FastAPI wrapper


def create_app(service: AgentService, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="cetalk agent service")
    app.state.service = service
    queues: dict[str, list] = {}

    def push(message: protocol.Message) -> None:
        for target in message.audience:
            for queue in queues.get(target, []):
                queue.put_nowait(message.to_json())

    service.add_listener(push)

    @app.post("/sessions")
    async def create_session(body: dict = Body(...)):
        try:
            session = service.create_session(
                user=body.get("user", "anonymous"),
                role=body.get("role", ""),
                device=body.get("device", "phone"),
                area=body.get("area"),
            )
        except ServiceError as err:
            raise HTTPException(status_code=400, detail=str(err))
        return session.to_json()

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        try:
            return service.get_session(session_id).to_json()
        except ServiceError as err:
            raise HTTPException(status_code=404, detail=str(err))

    @app.post("/sessions/{session_id}/messages")
    async def post_message(session_id: str, body: dict = Body(...)):
        try:
            messages = service.post_message(session_id, body)
        except (ServiceError, protocol.ProtocolError, CeError) as err:
            return {
                "error": str(err),
                "messages": [],
                "score": service.get_session(session_id).score
                if session_id in service.sessions
                else 0,
            }
        return {
            "messages": [m.to_json() for m in messages],
            "score": service.get_session(session_id).score,
        }

    @app.get("/kb/facts")
    async def kb_facts(
        subject: str | None = None,
        property: str | None = None,
        object: str | None = None,
        concept: str | None = None,
    ):
        try:
            return service.query_facts(
                subject=subject, property=property, object=object, concept=concept
            )
        except CeError as err:
            raise HTTPException(status_code=400, detail=str(err))

    @app.post("/kb/model")
    async def kb_model(text: str = Body(..., media_type="text/plain")):
        try:
            return service.upload_model(text)
        except (CeError, ce.CeSyntaxError) as err:
            raise HTTPException(status_code=400, detail=str(err))

    @app.get("/kb", response_class=PlainTextResponse)
    async def kb_dump():
        return persist.persist_text(service.kb)

    @app.get("/conversations/{conv_id}")
    async def get_conversation(conv_id: str):
        conv = service.conversations.get(conv_id)
        if conv is None:
            raise HTTPException(status_code=404, detail=f"unknown conversation '{conv_id}'")
        return {
            "id": conv.id,
            "participants": list(conv.participants),
            "interaction": conv.interaction.value if conv.interaction else None,
            "state": conv.state,
            "transcript": [m.to_json() for m in conv.transcript],
        }

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        await websocket.accept()
        if session_id not in service.sessions:
            await websocket.close(code=4404)
            return
        queue: asyncio.Queue = asyncio.Queue()
        for message in service.session_log[session_id]:
            queue.put_nowait(message.to_json())
        queues.setdefault(session_id, []).append(queue)
        try:
            while True:
                await websocket.send_json(await queue.get())
        except WebSocketDisconnect:
            pass
        finally:
            queues[session_id].remove(queue)

    return app
