import itertools
from importlib import resources

import pytest

from cetalk import fusion, gist, kernel, protocol


def data_text(name: str) -> str:
    return resources.files("cetalk.data").joinpath(name).read_text(encoding="utf-8")


SPOT_REPORT = "Suspicious vehicle heading south: black saloon with license plate DEF456"

USE_CASE_PREMISES = """
there is a person named p1 that is known as 'John Smith' and is a suspect.
the person p1 has DEF456 as linked vehicle registration.
there is a vehicle named v48 that has DEF456 as registration.
"""


@pytest.fixture(scope="session")
def model_text() -> str:
    return data_text("model.ce")


@pytest.fixture()
def kb(model_text) -> kernel.KnowledgeBase:
    fresh = kernel.KnowledgeBase()
    kernel.load_ce(fresh, model_text)
    return fresh


@pytest.fixture()
def kb_factory(model_text):
    def make(extra: str = "", provenance=None) -> kernel.KnowledgeBase:
        fresh = kernel.KnowledgeBase()
        kernel.load_ce(fresh, model_text)
        if extra:
            kernel.load_ce(fresh, extra, provenance)
        return fresh

    return make


@pytest.fixture()
def rules():
    return fusion.parse_rules(data_text("rules.ce"))


@pytest.fixture()
def templates():
    return gist.parse_templates(data_text("templates.gist"))


@pytest.fixture()
def ctx_factory(model_text, templates):
    """Protocol contexts with a deterministic clock."""

    def make(extra: str = "", provenance=None, **overrides) -> protocol.ProtocolContext:
        fresh = kernel.KnowledgeBase()
        kernel.load_ce(fresh, model_text)
        if extra:
            kernel.load_ce(fresh, extra, provenance)
        defaults = dict(
            kb=fresh,
            templates=templates,
            rules=fusion.parse_rules(data_text("rules.ce")),
            mandatory_slots={"vehicle": ["registration", "direction of travel"]},
            clock=itertools.count(1_000_000).__next__,
        )
        defaults.update(overrides)
        return protocol.ProtocolContext(**defaults)

    return make
