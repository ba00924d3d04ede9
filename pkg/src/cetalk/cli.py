"""Command-line entry points.

* ``cetalk interpret``: batch-interpret NL submissions (one per line),
  emit per-row results plus summary statistics, optionally rendering
  figures alongside.
* ``cetalk fuse``: run the rule engine over a CE fact file.
* ``cetalk repl``: a terminal confirm-loop against the full agent
  stack (accept / correct / why / expand / ask commands).
* ``cetalk serve``: the HTTP + WebSocket agent service.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from . import ce, fusion, persist, protocol, report
from .kernel import CeError, KnowledgeBase, Told, fact_clause, load_ce
from .interpreter import DEFAULT_LOOKAHEAD
from .service import AgentService, ServiceConfig


def _bundled(name: str) -> str:
    return resources.files("cetalk.data").joinpath(name).read_text(encoding="utf-8")


def _read(path: str | None, default_name: str | None) -> str:
    if path is None:
        return _bundled(default_name) if default_name else ""
    return Path(path).read_text(encoding="utf-8")


def _load_kb(args) -> KnowledgeBase:
    kb = KnowledgeBase()
    load_ce(kb, _read(getattr(args, "model", None), "model.ce"))
    return kb


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cetalk")
    sub = parser.add_subparsers(dest="command", required=True)

    p_int = sub.add_parser("interpret", help="interpret NL submissions, one per line")
    p_int.add_argument("--model", help="CE model file (bundled model by default)")
    p_int.add_argument("--input", help="submissions file (stdin by default)")
    p_int.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p_int.add_argument("--figures", help="directory for score/length figures")
    p_int.add_argument("--lookahead", type=int, default=DEFAULT_LOOKAHEAD)
    p_int.set_defaults(func=cmd_interpret)

    p_fuse = sub.add_parser("fuse", help="run fusion rules over a CE fact file")
    p_fuse.add_argument("--model", help="CE model file")
    p_fuse.add_argument("--rules", help="rule file (bundled rules by default)")
    p_fuse.add_argument("--kb", help="CE statements to load before running")
    p_fuse.add_argument("--kb-out", help="persist the resulting KB here")
    p_fuse.set_defaults(func=cmd_fuse)

    p_repl = sub.add_parser("repl", help="interactive confirm loop")
    p_repl.add_argument("--model", help="CE model file")
    p_repl.add_argument("--rules", help="rule file")
    p_repl.add_argument("--templates", help="gist template file")
    p_repl.add_argument("--catalogue", help="asset catalogue CE file")
    p_repl.add_argument("--kb", help="CE statements to preload")
    p_repl.add_argument("--kb-out", help="persist the KB here on quit")
    p_repl.add_argument("--user", default="Border Patrol")
    p_repl.add_argument("--role", default="patrol")
    p_repl.add_argument("--area", default=None)
    p_repl.set_defaults(func=cmd_repl)

    p_serve = sub.add_parser("serve", help="run the agent service")
    p_serve.add_argument("--model", help="CE model file")
    p_serve.add_argument("--rules", help="rule file")
    p_serve.add_argument("--templates", help="gist template file")
    p_serve.add_argument("--catalogue", help="asset catalogue CE file")
    p_serve.add_argument("--kb", help="CE statements to preload")
    p_serve.add_argument("--kb-out", help="persist the KB here on shutdown")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--ui", help="serve a chat client directory at /ui")
    p_serve.add_argument(
        "--mode-map",
        default="High=auto,Medium=authorize,Low=authorize",
        help="per-priority assignment mode, e.g. 'High=auto,Medium=authorize'",
    )
    p_serve.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CeError, ce.CeSyntaxError, fusion.FusionError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


# ----------------------------------------------------------------------


def cmd_interpret(args) -> int:
    kb = _load_kb(args)
    if args.input:
        text = Path(args.input).read_text(encoding="utf-8")
    else:
        text = sys.stdin.read()
    submissions = [line for line in text.splitlines() if line.strip()]
    rep = report.run_report(submissions, kb, args.lookahead)
    if args.format == "json":
        print(rep.to_json())
    elif args.format == "csv":
        print(rep.to_delimited(","))
        print(rep.aggregate_text())
    else:
        print(rep.to_text())
    if args.figures:
        for path in report.render_figures(rep, args.figures):
            print(f"figure: {path}", file=sys.stderr)
    return 0


def cmd_fuse(args) -> int:
    kb = _load_kb(args)
    if args.kb:
        load_ce(kb, Path(args.kb).read_text(encoding="utf-8"))
    rules = fusion.parse_rules(_read(args.rules, "rules.ce"))
    result = fusion.run_rules(kb, rules)
    print(f"fixpoint after {result.iterations} iteration(s); "
          f"{len(result.new_facts)} new fact(s)")
    for fact in result.new_facts:
        inst = kb.get_instance(fact.subject)
        stmt = ce.InstanceFacts(inst.concept, inst.id, (fact_clause(kb, fact),))
        print(ce.render_statement(stmt))
    if args.kb_out:
        persist.persist(kb, args.kb_out)
        print(f"kb written to {args.kb_out}")
    return 0


def _service_from_args(args) -> AgentService:
    config = ServiceConfig(
        model_text=_read(getattr(args, "model", None), "model.ce"),
        rules_text=_read(getattr(args, "rules", None), "rules.ce"),
        templates_text=_read(getattr(args, "templates", None), "templates.gist"),
        catalogue_text=_read(getattr(args, "catalogue", None), "catalogue.ce"),
        kb_path=getattr(args, "kb_out", None),
    )
    mode_map = getattr(args, "mode_map", None)
    if mode_map:
        pairs = (item.partition("=") for item in mode_map.split(",") if item)
        config.tasking.mode_map = {k.strip(): v.strip() for k, _, v in pairs}
    service = AgentService(config)
    if getattr(args, "kb", None):
        load_ce(
            service.kb,
            Path(args.kb).read_text(encoding="utf-8"),
            Told("preloaded intelligence"),
        )
    return service


def cmd_repl(args) -> int:
    service = _service_from_args(args)
    session = service.create_session(args.user, args.role, "terminal", args.area)
    print(f"session {session.id} ({args.user}, {args.role}); "
          "type a report, or: accept | correct <text> | why <id> | "
          "expand <gist> | ask <concept> | save | quit")
    pending_conv: str | None = None

    def show(messages) -> None:
        for m in messages:
            body = m.body
            if m.kind == protocol.MessageKind.CE_CONFIRM_REQUEST:
                print(f"[{m.sender}] please confirm (score {body.get('score', 0)}):")
                print("  gist: " + body.get("gist", {}).get("text", ""))
                for line in body.get("ce", "").splitlines():
                    print("  ce:   " + line)
                if body.get("unmatched_words"):
                    print("  ignored: " + " ".join(body["unmatched_words"]))
            elif m.sender != args.user:
                text = body.get("text") or body.get("ce") or str(body)
                print(f"[{m.sender}] {m.kind.value}: {text}")

    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            line = "quit"
        if not line:
            continue
        command, _, rest = line.partition(" ")
        try:
            if command == "quit":
                if args.kb_out:
                    service.save()
                    print(f"kb written to {args.kb_out}")
                return 0
            if command == "save":
                service.save()
                print(f"kb written to {args.kb_out or service.config.kb_path}")
            elif command == "accept" and pending_conv:
                show(service.post_message(session.id, {"kind": "confirm_accept", "conversation": pending_conv}))
                print(f"score: {service.get_session(session.id).score}")
                pending_conv = None
            elif command == "correct" and pending_conv:
                show(service.post_message(session.id, {"kind": "confirm_correct", "conversation": pending_conv, "text": rest}))
            elif command == "why":
                ref = rest.strip()
                opened = service.post_message(session.id, {"kind": "ask", "subject": ref})
                show(opened)
                messages = service.post_message(
                    session.id,
                    {"kind": "why", "conversation": opened[0].conversation, "about": ref},
                )
                show(messages)
            elif command == "expand":
                messages = service.post_message(session.id, {"kind": "expand_request", "conversation": _gist_conv(service, session, rest.strip()), "gist_id": rest.strip()})
                show(messages)
            elif command == "ask":
                messages = service.post_message(session.id, {"kind": "ask", "concept": rest.strip() or None})
                show(messages)
            else:
                messages = service.post_message(session.id, {"kind": "nl_input", "text": line})
                show(messages)
                pending_conv = messages[0].conversation if messages else None
        except Exception as err:  # the loop must survive any command error
            print(f"error: {err}")
    return 0


def _gist_conv(service: AgentService, session, gist_id: str) -> str | None:
    for message in reversed(service.session_log[session.id]):
        if message.kind == protocol.MessageKind.GIST and message.body.get("gist_id") == gist_id:
            return message.conversation
    return None


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    service = _service_from_args(args)
    app = create_app(service, ui_dir=args.ui)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    finally:
        if args.kb_out:
            service.save()
    return 0


if __name__ == "__main__":
    sys.exit(main())
