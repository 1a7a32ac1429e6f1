"""Fixed vocabulary: plan/quality classes, comparison predicates, concepts.

Instance data lives in the ``app`` namespace; reused upper-ontology terms in
``dul``/``rdf``; the plan-comparison vocabulary and the four typicality
concepts in ``ocra``.
"""

from __future__ import annotations

import re
from enum import Enum

from .kstore import Term

RDF_TYPE = Term("rdf", "type")

DUL_PLAN = Term("dul", "Plan")
DUL_QUALITY = Term("dul", "Quality")
IS_QUALITY_OF = Term("dul", "isQualityOf")
HAS_VALUE = Term("dul", "hasValue")
# Plan-level classification predicate; quality-level keeps the ontology's
# historical "isClassifyBy" spelling.
IS_CLASSIFIED_BY = Term("dul", "isClassifiedBy")
IS_CLASSIFY_BY = Term("dul", "isClassifyBy")

TYPICAL_PLAN = Term("ocra", "TypicalPlan")
ATYPICAL_PLAN = Term("ocra", "AtypicalPlan")
TYPICAL_QUALITY_VALUE = Term("ocra", "TypicalPlanQualityValue")
ATYPICAL_QUALITY_VALUE = Term("ocra", "AtypicalPlanQualityValue")

HAS_BETTER_QUALITY_VALUE_THAN = Term("ocra", "hasBetterQualityValueThan")

IS_CHEAPER_PLAN_THAN = Term("ocra", "isCheaperPlanThan")
IS_MORE_EXPENSIVE_PLAN_THAN = Term("ocra", "isMoreExpensivePlanThan")
IS_SHORTER_PLAN_THAN = Term("ocra", "isShorterPlanThan")
IS_LONGER_PLAN_THAN = Term("ocra", "isLongerPlanThan")
IS_FASTER_PLAN_THAN = Term("ocra", "isFasterPlanThan")
IS_SLOWER_PLAN_THAN = Term("ocra", "isSlowerPlanThan")
IS_BETTER_PLAN_THAN = Term("ocra", "isBetterPlanThan")
IS_WORSE_PLAN_THAN = Term("ocra", "isWorsePlanThan")

#: Plan-level predicate pairs (predicate, inverse).
INVERSE_PREDICATES = {
    IS_CHEAPER_PLAN_THAN: IS_MORE_EXPENSIVE_PLAN_THAN,
    IS_MORE_EXPENSIVE_PLAN_THAN: IS_CHEAPER_PLAN_THAN,
    IS_SHORTER_PLAN_THAN: IS_LONGER_PLAN_THAN,
    IS_LONGER_PLAN_THAN: IS_SHORTER_PLAN_THAN,
    IS_FASTER_PLAN_THAN: IS_SLOWER_PLAN_THAN,
    IS_SLOWER_PLAN_THAN: IS_FASTER_PLAN_THAN,
    IS_BETTER_PLAN_THAN: IS_WORSE_PLAN_THAN,
    IS_WORSE_PLAN_THAN: IS_BETTER_PLAN_THAN,
}

#: Canonical order for comparison predicates inside one narrative sentence.
COMPARISON_ORDER = (
    IS_CHEAPER_PLAN_THAN,
    IS_MORE_EXPENSIVE_PLAN_THAN,
    IS_SHORTER_PLAN_THAN,
    IS_LONGER_PLAN_THAN,
    IS_FASTER_PLAN_THAN,
    IS_SLOWER_PLAN_THAN,
    IS_BETTER_PLAN_THAN,
    IS_WORSE_PLAN_THAN,
)


class PropertyKind(str, Enum):
    COST = "cost"
    MAKESPAN = "makespan"
    NUM_TASKS = "num_tasks"


#: Per-kind attribution predicate linking a plan to its quality entity.
ATTRIBUTION_PREDICATE = {
    PropertyKind.MAKESPAN: Term("ocra", "hasMakespan"),
    PropertyKind.NUM_TASKS: Term("ocra", "hasNumberOfTasks"),
    PropertyKind.COST: Term("ocra", "hasCost"),
}

#: Winner-subject comparison predicate per kind (lower value wins all three).
WINNER_PREDICATE = {
    PropertyKind.COST: IS_CHEAPER_PLAN_THAN,
    PropertyKind.NUM_TASKS: IS_SHORTER_PLAN_THAN,
    PropertyKind.MAKESPAN: IS_FASTER_PLAN_THAN,
}

#: Quality order used in narrative sentences.
NARRATIVE_KIND_ORDER = (PropertyKind.MAKESPAN, PropertyKind.NUM_TASKS, PropertyKind.COST)

_QUALITY_SUFFIX = {
    PropertyKind.MAKESPAN: "makespan",
    PropertyKind.NUM_TASKS: "number_of_tasks",
    PropertyKind.COST: "cost",
}


def sanitize_local(name: str) -> str:
    out = re.sub(r"[^0-9A-Za-z]+", "_", name).strip("_")
    if not out:
        raise ValueError(f"identifier {name!r} has no usable characters")
    return out


def plan_term(plan_id: str) -> Term:
    return Term("app", "Plan_" + sanitize_local(plan_id))


def quality_term(plan_id: str, kind: PropertyKind) -> Term:
    return Term("app", plan_term(plan_id).local + "_" + _QUALITY_SUFFIX[kind])
