"""Contrastive narrative retrieval and deterministic text rendering.

A narrative compares exactly two plans using only triples from the store
plus fixed connectors.  Specificity picks the tuple set:

* level 1 -- plan-level comparison predicates between the two plans;
* level 2 -- adds per-quality attribution sentences and the plan
  classification sentence;
* level 3 -- adds the literal value sentence of every quality.

Rendering: entity labels are quoted, same-subject predicate chains join with
"and", contrastive pairs join with "; while", and sentences are ordered
comparisons, attributions, classifications, values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum
from itertools import combinations

from .kstore import ALWAYS, KnowledgeBase, Literal, Term, TimeInterval, Triple
from .vocab import (
    ATTRIBUTION_PREDICATE,
    COMPARISON_ORDER,
    DUL_PLAN,
    HAS_VALUE,
    IS_CLASSIFIED_BY,
    NARRATIVE_KIND_ORDER,
    RDF_TYPE,
    plan_term,
)


class NarrativeError(ValueError):
    pass


class Specificity(IntEnum):
    L1 = 1
    L2 = 2
    L3 = 3


#: Fixed rendering for the predicates a narrative can contain; anything not
#: listed falls back to camel-case splitting.
PREDICATE_PHRASES = {
    "isCheaperPlanThan": "is cheaper plan than",
    "isMoreExpensivePlanThan": "is more expensive plan than",
    "isShorterPlanThan": "is shorter plan than",
    "isLongerPlanThan": "is longer plan than",
    "isFasterPlanThan": "is faster plan than",
    "isSlowerPlanThan": "is slower plan than",
    "isBetterPlanThan": "is better plan than",
    "isWorsePlanThan": "is worse plan than",
    "hasMakespan": "has makespan",
    "hasNumberOfTasks": "has number of tasks",
    "hasCost": "has cost",
    "hasValue": "has value",
    "isClassifiedBy": "is classified by",
    "isClassifyBy": "is classify by",
    "isQualityOf": "is quality of",
    "hasBetterQualityValueThan": "has better quality value than",
}


def predicate_phrase(p: Term) -> str:
    phrase = PREDICATE_PHRASES.get(p.local)
    if phrase is None:
        phrase = re.sub(r"(?<=\w)([A-Z])", r" \1", p.local).lower()
    return phrase


def quote(label: str) -> str:
    return f"`{label}'"


def _entity_text(o: Term | Literal) -> str:
    return quote(o.label if isinstance(o, Term) else o.display())


@dataclass(frozen=True)
class Narrative:
    a: str
    b: str
    level: Specificity
    tuples: tuple[Triple, ...]
    text: str

    @property
    def ref(self) -> str:
        return f"{self.a}--{self.b}#L{int(self.level)}"


def _contrast_sentence(left: Triple, right: Triple) -> str:
    l = f"{_entity_text(left.subject)} {predicate_phrase(left.predicate)} {_entity_text(left.object)}"
    r = f"{_entity_text(right.subject)} {predicate_phrase(right.predicate)} {_entity_text(right.object)}"
    return f"{l}; while {r}."


def retrieve_pair(
    kb: KnowledgeBase,
    a: str,
    b: str,
    level: Specificity | int,
    within: TimeInterval = ALWAYS,
) -> Narrative:
    """Tuples and text for one plan pair at the given specificity."""
    level = Specificity(level)
    if a == b:
        raise NarrativeError(f"cannot narrate plan {a!r} against itself")
    ta, tb = plan_term(a), plan_term(b)
    cls_a = kb.query(subject=ta, predicate=IS_CLASSIFIED_BY, within=within)
    cls_b = kb.query(subject=tb, predicate=IS_CLASSIFIED_BY, within=within)
    if not cls_a or not cls_b:
        raise NarrativeError(
            f"pair ({a!r}, {b!r}) has no inference output; run classification and inference first"
        )

    comparisons: list[Triple] = []
    for subj, obj in ((ta, tb), (tb, ta)):
        for pred in COMPARISON_ORDER:
            comparisons.extend(kb.query(subject=subj, predicate=pred, object=obj, within=within))

    tuples: list[Triple] = list(comparisons)
    sentences: list[str] = []
    for subj in (ta, tb):
        chain = [t for t in comparisons if t.subject == subj]
        if chain:
            phrases = " and ".join(predicate_phrase(t.predicate) for t in chain)
            sentences.append(f"{_entity_text(subj)} {phrases} {_entity_text(chain[0].object)}.")
    if level == Specificity.L1 and not comparisons:
        sentences.append(
            f"{_entity_text(ta)} and {_entity_text(tb)} have no contrastive relations."
        )

    attributions: list[tuple[Triple, Triple]] = []
    values: list[tuple[Triple, Triple]] = []
    if level >= Specificity.L2:
        for kind in NARRATIVE_KIND_ORDER:
            pred = ATTRIBUTION_PREDICATE[kind]
            qa = kb.query(subject=ta, predicate=pred, within=within)
            qb = kb.query(subject=tb, predicate=pred, within=within)
            if not qa or not qb:
                raise NarrativeError(f"pair ({a!r}, {b!r}) is missing a {kind.value} quality")
            attributions.append((qa[0], qb[0]))
        for left, right in attributions:
            tuples.extend((left, right))
            sentences.append(_contrast_sentence(left, right))
        tuples.extend((cls_a[0], cls_b[0]))
        sentences.append(_contrast_sentence(cls_a[0], cls_b[0]))
    if level == Specificity.L3:
        for left, right in attributions:
            va = kb.query(subject=left.object, predicate=HAS_VALUE, within=within)
            vb = kb.query(subject=right.object, predicate=HAS_VALUE, within=within)
            if not va or not vb:
                raise NarrativeError(f"pair ({a!r}, {b!r}) is missing a quality value")
            values.append((va[0], vb[0]))
        for left, right in values:
            tuples.extend((left, right))
            sentences.append(_contrast_sentence(left, right))

    return Narrative(a=a, b=b, level=level, tuples=tuple(tuples), text=" ".join(sentences))


def plan_ids(kb: KnowledgeBase, within: TimeInterval = ALWAYS) -> list[str]:
    """Plan identifiers known to the store, in lexicographic order."""
    found = kb.query(predicate=RDF_TYPE, object=DUL_PLAN, within=within)
    ids = {t.subject.local.removeprefix("Plan_") for t in found}
    return sorted(ids)


def narrate_all(
    kb: KnowledgeBase,
    level: Specificity | int,
    within: TimeInterval = ALWAYS,
) -> list[Narrative]:
    """One narrative per unordered plan pair: n(n-1)/2 in total."""
    ids = plan_ids(kb, within)
    if len(ids) < 2:
        raise NarrativeError(f"need at least 2 plans to narrate, store has {len(ids)}")
    return [retrieve_pair(kb, a, b, level, within) for a, b in combinations(ids, 2)]
