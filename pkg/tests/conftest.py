"""Shared fixtures: the worked X/Y plan pair and a full seed-42 pipeline run."""

from __future__ import annotations

import pytest

from planexp.experiences import PlanProperties, ground_properties
from planexp.inference import run_all
from planexp.kstore import ALWAYS, KnowledgeBase, Triple
from planexp.pipeline import RunDir
from planexp.refine import DeterministicBackend
from planexp.vocab import (
    ATYPICAL_QUALITY_VALUE,
    IS_CLASSIFY_BY,
    TYPICAL_QUALITY_VALUE,
    PropertyKind,
    quality_term,
)

PLAN_X = PlanProperties("X", num_tasks=12, makespan=28.20, cost=0)
PLAN_Y = PlanProperties("Y", num_tasks=18, makespan=40.35, cost=3)

#: Golden level-3 narrative for the worked pair: X typical, Y atypical.
WORKED_NARRATIVE = (
    "`Plan X' is cheaper plan than and is shorter plan than and is faster plan than "
    "and is better plan than `Plan Y'. "
    "`Plan X' has makespan `Plan X makespan'; while `Plan Y' has makespan `Plan Y makespan'. "
    "`Plan X' has number of tasks `Plan X number of tasks'; while `Plan Y' has number of "
    "tasks `Plan Y number of tasks'. "
    "`Plan X' has cost `Plan X cost'; while `Plan Y' has cost `Plan Y cost'. "
    "`Plan X' is classified by `TypicalPlan'; while `Plan Y' is classified by `AtypicalPlan'. "
    "`Plan X makespan' has value `28.20'; while `Plan Y makespan' has value `40.35'. "
    "`Plan X number of tasks' has value `12'; while `Plan Y number of tasks' has value `18'. "
    "`Plan X cost' has value `0'; while `Plan Y cost' has value `3'."
)


def classify_qualities(kb: KnowledgeBase, plan_id: str, typical: bool) -> None:
    """Directly assert quality-value classifications for one plan."""
    concept = TYPICAL_QUALITY_VALUE if typical else ATYPICAL_QUALITY_VALUE
    for kind in PropertyKind:
        kb.assert_triple(Triple(quality_term(plan_id, kind), IS_CLASSIFY_BY, concept, ALWAYS))


def build_worked_kb() -> KnowledgeBase:
    """X and Y grounded with the worked property values, X typical, Y atypical."""
    kb = KnowledgeBase()
    ground_properties(kb, PLAN_X)
    ground_properties(kb, PLAN_Y)
    classify_qualities(kb, "X", typical=True)
    classify_qualities(kb, "Y", typical=False)
    run_all(kb, ["X", "Y"])
    return kb


@pytest.fixture
def worked_kb() -> KnowledgeBase:
    return build_worked_kb()


def run_full_pipeline(path, seed: int = 42, n: int = 18, alpha: float = 0.68, mu0: float = 0.5) -> RunDir:
    run = RunDir(path)
    run.generate(seed, n)
    run.classify(alpha)
    run.infer()
    run.narrate()
    run.refine_all(DeterministicBackend())
    run.evaluate(mu0)
    return run


@pytest.fixture(scope="session")
def seed42_run(tmp_path_factory) -> RunDir:
    """Complete deterministic-backend pipeline over the seed-42, 18-plan corpus."""
    return run_full_pipeline(tmp_path_factory.mktemp("seed42"))
