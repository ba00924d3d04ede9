"""Conversational controlled-English engine.

Turns natural-language field reports into controlled-English facts,
fuses them with stored knowledge through provenance-tracked rules, and
drives confirm / ask-tell / gist-expand / why conversations between
human and machine agents, including sensing-task generation.
"""

from .ce import (
    Because,
    CeSyntaxError,
    InstanceFacts,
    NewInstance,
    parse_model,
    parse_statement,
    parse_statements,
    render_statement,
    render_statements,
)
from .kernel import (
    Concept,
    Fact,
    Inferred,
    Instance,
    KnowledgeBase,
    Match,
    Pattern,
    PropertyDef,
    Told,
    assert_statement,
    facts_to_statements,
    load_ce,
)
from .interpreter import Interpretation, interpret, scan, tokenize
from .fusion import Rule, parse_rules, rationale, run_rules
from .gist import GistContext, GistDescriptor, GistStore, parse_templates
from .tasking import Asset, Catalogue, Task, build_task, match_assets
from .protocol import Conversation, Interaction, Message, MessageKind, ProtocolContext
from .service import AgentService, ServiceConfig, create_app

__version__ = "0.1.0"

__all__ = [
    "AgentService",
    "Asset",
    "Because",
    "Catalogue",
    "CeSyntaxError",
    "Concept",
    "Conversation",
    "Fact",
    "GistContext",
    "GistDescriptor",
    "GistStore",
    "Inferred",
    "Instance",
    "InstanceFacts",
    "Interaction",
    "Interpretation",
    "KnowledgeBase",
    "Match",
    "Message",
    "MessageKind",
    "NewInstance",
    "Pattern",
    "PropertyDef",
    "ProtocolContext",
    "Rule",
    "ServiceConfig",
    "Task",
    "Told",
    "assert_statement",
    "build_task",
    "create_app",
    "facts_to_statements",
    "interpret",
    "load_ce",
    "match_assets",
    "parse_model",
    "parse_rules",
    "parse_statement",
    "parse_statements",
    "parse_templates",
    "rationale",
    "render_statement",
    "render_statements",
    "run_rules",
    "scan",
    "tokenize",
    "__version__",
]
