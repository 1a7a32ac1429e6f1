"""Ontological rule layer: pairwise plan comparison and plan classification.

All three plan properties are lower-is-better, so the plan with the lower
value gets the winner-subject predicate (cheaper / shorter / faster).  A plan
is better than another only under strict Pareto dominance: better on at
least one property and worse on none.  A plan is typical exactly when every
one of its qualities is classified typical; the rule exits on the first
atypical quality it sees.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .kstore import ALWAYS, KnowledgeBase, Literal, Term, Triple
from .typicality import TypicalityLabel
from .vocab import (
    ATTRIBUTION_PREDICATE,
    ATYPICAL_PLAN,
    ATYPICAL_QUALITY_VALUE,
    HAS_BETTER_QUALITY_VALUE_THAN,
    HAS_VALUE,
    IS_BETTER_PLAN_THAN,
    IS_CLASSIFIED_BY,
    IS_CLASSIFY_BY,
    IS_QUALITY_OF,
    TYPICAL_PLAN,
    WINNER_PREDICATE,
    PropertyKind,
    plan_term,
)


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class RunSummary:
    pairs_compared: int
    typical: int
    atypical: int


def _quality_and_value(kb: KnowledgeBase, plan_id: str, kind: PropertyKind) -> tuple[Term, float]:
    tp = plan_term(plan_id)
    attributions = kb.query(subject=tp, predicate=ATTRIBUTION_PREDICATE[kind])
    if not attributions:
        raise InferenceError(f"plan {plan_id!r} is missing its {kind.value} quality")
    quality = attributions[0].object
    values = kb.query(subject=quality, predicate=HAS_VALUE)
    if not values or not isinstance(values[0].object, Literal):
        raise InferenceError(f"quality {quality.render()} has no numeric value")
    return quality, values[0].object.value


def compare_pair(kb: KnowledgeBase, a: str, b: str) -> list[Triple]:
    """Assert quality- and plan-level comparison triples for one plan pair.

    Equal property values assert nothing for that property; re-running is
    idempotent.  Returns the comparison triples (asserted or already present).
    """
    if a == b:
        raise InferenceError(f"plan {a!r} cannot be compared with itself")
    ta, tb = plan_term(a), plan_term(b)
    produced: list[Triple] = []
    wins_a = wins_b = 0
    for kind in PropertyKind:
        qa, va = _quality_and_value(kb, a, kind)
        qb, vb = _quality_and_value(kb, b, kind)
        if va == vb:
            continue
        if va < vb:
            wins_a += 1
            win_q, lose_q, win_t, lose_t = qa, qb, ta, tb
        else:
            wins_b += 1
            win_q, lose_q, win_t, lose_t = qb, qa, tb, ta
        produced.append(Triple(win_q, HAS_BETTER_QUALITY_VALUE_THAN, lose_q, ALWAYS))
        produced.append(Triple(win_t, WINNER_PREDICATE[kind], lose_t, ALWAYS))
    if wins_a and not wins_b:
        produced.append(Triple(ta, IS_BETTER_PLAN_THAN, tb, ALWAYS))
    elif wins_b and not wins_a:
        produced.append(Triple(tb, IS_BETTER_PLAN_THAN, ta, ALWAYS))
    for t in produced:
        kb.assert_triple(t)
    return produced


def _classify_plan_counted(kb: KnowledgeBase, plan_id: str) -> tuple[TypicalityLabel, int]:
    tp = plan_term(plan_id)
    qualities = [t.subject for t in kb.query(predicate=IS_QUALITY_OF, object=tp)]
    if not qualities:
        raise InferenceError(f"plan {plan_id!r} has no classified qualities")
    label = TypicalityLabel.TYPICAL
    inspected = 0
    for q in qualities:
        inspected += 1
        classifications = kb.query(subject=q, predicate=IS_CLASSIFY_BY)
        if not classifications:
            raise InferenceError(f"quality {q.render()} of plan {plan_id!r} is not classified")
        if classifications[0].object == ATYPICAL_QUALITY_VALUE:
            label = TypicalityLabel.ATYPICAL
            break
    concept = TYPICAL_PLAN if label is TypicalityLabel.TYPICAL else ATYPICAL_PLAN
    kb.assert_triple(Triple(tp, IS_CLASSIFIED_BY, concept, ALWAYS))
    return label, inspected


def classify_plan(kb: KnowledgeBase, plan_id: str) -> TypicalityLabel:
    """Typical iff every quality is typical; asserts the classification triple."""
    label, _ = _classify_plan_counted(kb, plan_id)
    return label


def run_all(kb: KnowledgeBase, plan_ids: list[str]) -> RunSummary:
    """compare_pair over every unordered pair, then classify_plan per plan."""
    ordered = sorted(plan_ids)
    pairs = 0
    for a, b in combinations(ordered, 2):
        compare_pair(kb, a, b)
        pairs += 1
    typical = atypical = 0
    for plan_id in ordered:
        if classify_plan(kb, plan_id) is TypicalityLabel.TYPICAL:
            typical += 1
        else:
            atypical += 1
    return RunSummary(pairs_compared=pairs, typical=typical, atypical=atypical)
