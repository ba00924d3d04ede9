"""Sensing-task generation and asset matchmaking (the Sam agent).

A trigger (typically a new suspect sighting) becomes a CE task request;
the task is matched against a catalogue of sensing assets filtered by
capability, detectable thing, area and availability, and ranked by
quality, retasking cost and id.  Spatial areas are named regions, not
geometry.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

from . import ce
from .kernel import CeError, KnowledgeBase, Pattern, UnknownIdError, fold


class TaskingError(CeError):
    pass


PRIORITIES = ("Low", "Medium", "High")


@dataclass(frozen=True)
class Task:
    """A sensing-task request, rendering to the CE task shape."""

    id: str
    capability: str
    detectable: str
    sought: str | None
    area: str
    priority: str
    flagged: bool = False  # true when the area is unknown and a human must complete it


@dataclass(frozen=True)
class Asset:
    id: str
    asset_type: str
    sensor_fit: str = ""
    capabilities: frozenset[str] = frozenset()
    detects: frozenset[str] = frozenset()
    areas: frozenset[str] = frozenset()
    quality: int = 0
    retask_cost: int = 0
    available: bool = True

    @property
    def description(self) -> str:
        if self.sensor_fit:
            return f"{self.asset_type} with {self.sensor_fit}"
        return self.asset_type


@dataclass
class TaskingConfig:
    capability: str = "localize"
    detectable_map: dict[str, str] = field(
        default_factory=lambda: {"vehicle": "car", "person": "people"}
    )
    priority_map: dict[str, str] = field(
        default_factory=lambda: {"suspect sighting": "High"}
    )
    # per-priority: "auto" assigns and notifies, "authorize" asks a human
    mode_map: dict[str, str] = field(
        default_factory=lambda: {"High": "auto", "Medium": "authorize", "Low": "authorize"}
    )

    def mode_for(self, priority: str) -> str:
        return self.mode_map.get(priority, "authorize")


# ----------------------------------------------------------------------
# catalogue


def assets_from_kb(kb: KnowledgeBase) -> list[Asset]:
    """Read asset declarations (CE facts) into Asset records."""
    out = []
    for inst in kb.instances.values():
        if "asset" not in kb.instance_types(inst.id):
            continue
        fields = {
            "asset type": "",
            "sensor fit": "",
            "quality rating": "0",
            "retasking cost": "0",
            "availability": "available",
        }
        caps, detects, areas = set(), set(), set()
        for fact in kb.facts_about(inst.id):
            pdef = kb.properties.get(fact.property)
            if pdef is None:
                continue
            name = fold(pdef.name)
            if name == "provides capability":
                caps.add(fact.object)
            elif name == "can detect":
                detects.add(fact.object)
            elif name == "covers area":
                areas.add(fact.object)
            elif name in fields:
                fields[name] = fact.object
        out.append(
            Asset(
                id=inst.id,
                asset_type=fields["asset type"],
                sensor_fit=fields["sensor fit"],
                capabilities=frozenset(caps),
                detects=frozenset(detects),
                areas=frozenset(areas),
                quality=_int(fields["quality rating"]),
                retask_cost=_int(fields["retasking cost"]),
                available=fold(fields["availability"]) == "available",
            )
        )
    out.sort(key=lambda a: a.id)
    return out


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        return 0


class Catalogue:
    """Live asset availability; assignment updates are atomic."""

    def __init__(self, assets: list[Asset]):
        self._assets = {a.id: a for a in assets}
        self._lock = threading.Lock()

    @classmethod
    def from_kb(cls, kb: KnowledgeBase) -> "Catalogue":
        return cls(assets_from_kb(kb))

    def assets(self) -> list[Asset]:
        return sorted(self._assets.values(), key=lambda a: a.id)

    def get(self, asset_id: str) -> Asset:
        asset = self._assets.get(asset_id)
        if asset is None:
            raise UnknownIdError(f"unknown asset '{asset_id}'")
        return asset

    def mark_tasked(self, asset_id: str) -> bool:
        """Claim an asset; false when it was no longer available."""
        with self._lock:
            asset = self.get(asset_id)
            if not asset.available:
                return False
            self._assets[asset_id] = replace(asset, available=False)
            return True

    def release(self, asset_id: str) -> None:
        with self._lock:
            self._assets[asset_id] = replace(self.get(asset_id), available=True)


# ----------------------------------------------------------------------
# task construction


def build_task(trigger_id: str, kb: KnowledgeBase, config: TaskingConfig | None = None) -> Task:
    """Build a task from a trigger instance (e.g. a suspect sighting).

    The task id is TS_ plus the trigger id, so re-deriving the task for
    the same trigger is idempotent.  A missing location fact yields an
    'unknown' area and flags the task for human completion."""
    config = config or TaskingConfig()
    trigger = kb.get_instance(trigger_id)
    target = None
    for fact in kb.facts_about(trigger_id):
        pdef = kb.properties.get(fact.property)
        if pdef is not None and fold(pdef.name) == "target vehicle":
            target = fact.object
            break
    if target is None:
        raise TaskingError(f"trigger '{trigger_id}' has no resolvable target")
    target_concept = kb.get_instance(target).concept
    detectable = config.detectable_map.get(target_concept)
    if detectable is None:
        for ancestor in kb.ancestors(target_concept):
            if ancestor in config.detectable_map:
                detectable = config.detectable_map[ancestor]
                break
    if detectable is None:
        raise TaskingError(f"no detectable thing mapped for '{target_concept}'")
    area, flagged = "unknown", True
    located = kb.query(Pattern(subject=target, property="last known area"))
    if located:
        area, flagged = located[-1].object, False
    priority = config.priority_map.get(trigger.concept, "Medium")
    return Task(
        id=f"TS_{trigger_id}",
        capability=config.capability,
        detectable=detectable,
        sought=target,
        area=area,
        priority=priority,
        flagged=flagged,
    )


def task_statement(task: Task) -> ce.NewInstance:
    clauses: list[ce.Clause] = [
        ce.PropertyClause(
            "requires", ce.InstanceRef("intelligence capability", task.capability), True
        ),
        ce.PropertyClause(
            "is looking for", ce.InstanceRef("detectable thing", task.detectable), True
        ),
    ]
    if task.sought is not None:
        clauses.append(
            ce.PropertyClause("is seeking instance", ce.InstanceRef("vehicle", task.sought), True)
        )
    clauses += [
        ce.PropertyClause("operates in", ce.InstanceRef("spatial area", task.area), True),
        ce.PropertyClause("is ranked with", ce.InstanceRef("task priority", task.priority), True),
    ]
    return ce.NewInstance("task", task.id, tuple(clauses))


# ----------------------------------------------------------------------
# matchmaking


def _qualifies(task: Task, asset: Asset) -> bool:
    return (
        task.capability in asset.capabilities
        and task.detectable in asset.detects
        and task.area in asset.areas
        and asset.available
    )


def match_assets(task: Task, catalogue: Catalogue | list[Asset]) -> list[Asset]:
    """Qualifying assets ranked by quality (desc), retasking cost (asc)
    and id; an empty list is a legal result."""
    assets = catalogue.assets() if isinstance(catalogue, Catalogue) else list(catalogue)
    hits = [a for a in assets if _qualifies(task, a)]
    hits.sort(key=lambda a: (-a.quality, a.retask_cost, a.id))
    return hits


# ----------------------------------------------------------------------
# notification content


def describe_target(task: Task, kb: KnowledgeBase) -> str:
    """Compose "black saloon car (DEF456)" from the sought instance."""
    colour = body = registration = None
    if task.sought is not None and task.sought in kb.instances:
        for fact in kb.facts_about(task.sought):
            pdef = kb.properties.get(fact.property)
            if pdef is None:
                continue
            name = fold(pdef.name)
            if name == "colour":
                colour = colour or fact.object
            elif name == "body type":
                body = body or fact.object
            elif name == "registration":
                registration = registration or fact.object
    parts = [p for p in (colour, body, task.detectable) if p]
    text = " ".join(parts)
    if registration:
        text += f" ({registration})"
    return text


def suspect_label(trigger_id: str, kb: KnowledgeBase) -> str | None:
    """The display name of the trigger's suspect candidate, if any."""
    if trigger_id not in kb.instances:
        return None
    for fact in kb.facts_about(trigger_id):
        pdef = kb.properties.get(fact.property)
        if pdef is not None and fold(pdef.name) == "suspect candidate":
            person = kb.get_instance(fact.object)
            return person.label or person.description or person.id
    return None


def notification_statement(task: Task, asset: Asset, kb: KnowledgeBase) -> ce.NewInstance:
    """A flattened summary instance that gist templates can fill from."""
    trigger_id = task.id[3:] if task.id.startswith("TS_") else task.id
    clauses: list[ce.Clause] = [
        ce.PropertyClause("tasked asset", asset.description),
        ce.PropertyClause("required capability", task.capability),
        ce.PropertyClause("target description", describe_target(task, kb)),
    ]
    suspect = suspect_label(trigger_id, kb)
    if suspect is not None:
        clauses.append(ce.PropertyClause("suspect description", suspect))
    clauses.append(ce.PropertyClause("operating area", task.area))
    return ce.NewInstance("task notification", f"TN_{task.id}", tuple(clauses))
