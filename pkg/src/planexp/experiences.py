"""Plan-execution experiences and the three plan properties they yield.

An experience is the recorded event sequence of one collaborative inspection
run.  From it we extract cost (how often the robot doubted), makespan
(wall-clock envelope) and number of tasks (every inspection event, so a
twice-inspected item counts twice).  Extracted properties are grounded into
the knowledge base as quality entities with numeric values.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum

from .kstore import ALWAYS, KnowledgeBase, Literal, Triple
from .vocab import (
    ATTRIBUTION_PREDICATE,
    DUL_PLAN,
    DUL_QUALITY,
    HAS_VALUE,
    IS_QUALITY_OF,
    RDF_TYPE,
    PropertyKind,
    plan_term,
    quality_term,
)


class CorpusError(ValueError):
    """Schema violation in an experience corpus."""


class GroundingConflictError(ValueError):
    """A plan_id was re-grounded with different property values."""


class Actor(str, Enum):
    HUMAN = "human"
    ROBOT = "robot"


class Action(str, Enum):
    INSPECT = "inspect"
    RE_INSPECT = "re_inspect"


@dataclass(frozen=True)
class TaskEvent:
    actor: Actor
    action: Action
    item: str
    start: float
    end: float
    doubted: bool = False

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise CorpusError(f"event on {self.item!r}: start {self.start} after end {self.end}")
        if self.doubted and self.actor is not Actor.ROBOT:
            raise CorpusError(f"event on {self.item!r}: only robot events can be doubted")


@dataclass(frozen=True)
class ExperienceRecord:
    plan_id: str
    events: tuple[TaskEvent, ...]

    def __post_init__(self) -> None:
        if not self.plan_id:
            raise CorpusError("plan_id must be non-empty")
        if not self.events:
            raise CorpusError(f"plan {self.plan_id!r}: events must be non-empty")
        starts = [e.start for e in self.events]
        if starts != sorted(starts):
            raise CorpusError(f"plan {self.plan_id!r}: events not ordered by start time")


@dataclass(frozen=True)
class PlanProperties:
    plan_id: str
    num_tasks: int
    makespan: float
    cost: int

    def __post_init__(self) -> None:
        if self.num_tasks < 1:
            raise CorpusError(f"plan {self.plan_id!r}: num_tasks must be >= 1")
        if not self.makespan > 0:
            raise CorpusError(f"plan {self.plan_id!r}: makespan must be > 0")
        if not 0 <= self.cost <= self.num_tasks:
            raise CorpusError(f"plan {self.plan_id!r}: cost must be in [0, num_tasks]")

    def value(self, kind: PropertyKind) -> float | int:
        return {
            PropertyKind.COST: self.cost,
            PropertyKind.MAKESPAN: self.makespan,
            PropertyKind.NUM_TASKS: self.num_tasks,
        }[kind]


def extract_properties(rec: ExperienceRecord) -> PlanProperties:
    """num_tasks = event count, makespan = max(end) - min(start), cost = doubt count."""
    if not rec.events:
        raise CorpusError(f"plan {rec.plan_id!r}: cannot extract properties of empty record")
    makespan = max(e.end for e in rec.events) - min(e.start for e in rec.events)
    return PlanProperties(
        plan_id=rec.plan_id,
        num_tasks=len(rec.events),
        makespan=makespan,
        cost=sum(1 for e in rec.events if e.doubted),
    )


# -- corpus file I/O --------------------------------------------------------

_EVENT_FIELDS = ("actor", "action", "item", "start", "end", "doubted")


def _event_from_json(obj: dict, where: str) -> TaskEvent:
    for f in _EVENT_FIELDS:
        if f not in obj:
            raise CorpusError(f"{where}: missing field {f!r}")
    try:
        actor = Actor(obj["actor"])
        action = Action(obj["action"])
    except ValueError as exc:
        raise CorpusError(f"{where}: {exc}") from exc
    if not isinstance(obj["start"], (int, float)) or not isinstance(obj["end"], (int, float)):
        raise CorpusError(f"{where}: start/end must be numbers")
    if not isinstance(obj["doubted"], bool):
        raise CorpusError(f"{where}: doubted must be a boolean")
    return TaskEvent(actor, action, str(obj["item"]), float(obj["start"]), float(obj["end"]), obj["doubted"])


def records_from_json(data) -> list[ExperienceRecord]:
    if not isinstance(data, list):
        raise CorpusError("corpus must be a JSON array of records")
    records = []
    seen: set[str] = set()
    for i, rec in enumerate(data):
        where = f"record {i}"
        if not isinstance(rec, dict) or "plan_id" not in rec or "events" not in rec:
            raise CorpusError(f"{where}: expected object with plan_id and events")
        plan_id = str(rec["plan_id"])
        if plan_id in seen:
            raise CorpusError(f"{where}: duplicate plan_id {plan_id!r}")
        seen.add(plan_id)
        if not isinstance(rec["events"], list):
            raise CorpusError(f"{where} (plan {plan_id!r}): events must be an array")
        events = tuple(
            _event_from_json(e, f"{where} (plan {plan_id!r}), events[{j}]")
            for j, e in enumerate(rec["events"])
        )
        records.append(ExperienceRecord(plan_id, events))
    return records


def records_to_json(records: list[ExperienceRecord]) -> list[dict]:
    return [
        {
            "plan_id": r.plan_id,
            "events": [
                {
                    "actor": e.actor.value,
                    "action": e.action.value,
                    "item": e.item,
                    "start": e.start,
                    "end": e.end,
                    "doubted": e.doubted,
                }
                for e in r.events
            ],
        }
        for r in records
    ]


def load_experiences(path) -> list[ExperienceRecord]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: not valid JSON: {exc}") from exc
    return records_from_json(data)


def save_experiences(path, records: list[ExperienceRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records_to_json(records), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- synthetic corpus -------------------------------------------------------


@dataclass(frozen=True)
class GenConfig:
    """Knobs for the synthetic experience generator.

    The robot inspects every tray item once; each doubted inspection is
    followed by a human re-inspection of the same item whose duration is
    scaled by ``human_speed_factor``.
    """

    tray_size: int = 12
    doubt_prob: float = 0.25
    duration_min: float = 1.5
    duration_max: float = 3.5
    human_speed_factor: float = 1.5

    def __post_init__(self) -> None:
        if self.tray_size < 1:
            raise CorpusError("tray_size must be >= 1")
        if not 0.0 <= self.doubt_prob <= 1.0:
            raise CorpusError("doubt_prob must be in [0, 1]")
        if not 0 < self.duration_min <= self.duration_max:
            raise CorpusError("need 0 < duration_min <= duration_max")
        if self.human_speed_factor <= 0:
            raise CorpusError("human_speed_factor must be > 0")


def generate_synthetic(seed: int, n: int, cfg: GenConfig = GenConfig()) -> list[ExperienceRecord]:
    """Deterministic corpus of ``n`` experiences for a fixed seed."""
    if n < 1:
        raise CorpusError("n must be >= 1")
    rng = random.Random(seed)
    records = []
    for i in range(1, n + 1):
        events = []
        t = 0.0
        doubted_items = []
        for j in range(1, cfg.tray_size + 1):
            item = f"case{j:02d}"
            dur = round(rng.uniform(cfg.duration_min, cfg.duration_max), 2)
            doubted = rng.random() < cfg.doubt_prob
            events.append(TaskEvent(Actor.ROBOT, Action.INSPECT, item, t, round(t + dur, 2), doubted))
            t = round(t + dur, 2)
            if doubted:
                doubted_items.append(item)
        for item in doubted_items:
            dur = round(rng.uniform(cfg.duration_min, cfg.duration_max) * cfg.human_speed_factor, 2)
            events.append(TaskEvent(Actor.HUMAN, Action.RE_INSPECT, item, t, round(t + dur, 2), False))
            t = round(t + dur, 2)
        records.append(ExperienceRecord(f"E{i:02d}", tuple(events)))
    return records


# -- grounding --------------------------------------------------------------


def ground_properties(kb: KnowledgeBase, p: PlanProperties) -> None:
    """Assert the plan, its three quality entities and their numeric values.

    Re-grounding the same plan with identical values is a no-op; differing
    values raise GroundingConflictError.
    """
    tp = plan_term(p.plan_id)
    kb.assert_triple(Triple(tp, RDF_TYPE, DUL_PLAN, ALWAYS))
    for kind in PropertyKind:
        q = quality_term(p.plan_id, kind)
        value = p.value(kind)
        lit = Literal(float(value) if kind is PropertyKind.MAKESPAN else int(value))
        existing = kb.query(subject=q, predicate=HAS_VALUE)
        if existing and any(t.object != lit for t in existing):
            old = ", ".join(t.object.render() for t in existing)
            raise GroundingConflictError(
                f"plan {p.plan_id!r} already grounded with {kind.value}={old}, got {lit.render()}"
            )
        kb.assert_triple(Triple(q, RDF_TYPE, DUL_QUALITY, ALWAYS))
        kb.assert_triple(Triple(q, IS_QUALITY_OF, tp, ALWAYS))
        kb.assert_triple(Triple(tp, ATTRIBUTION_PREDICATE[kind], q, ALWAYS))
        kb.assert_triple(Triple(q, HAS_VALUE, lit, ALWAYS))
