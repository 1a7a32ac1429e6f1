"""Empirical highest density intervals and typical/atypical classification.

The empirical HDI of a sample at coverage ``alpha`` is the narrowest window
of ``k = ceil(alpha * n)`` consecutive order statistics; ties on width go to
the leftmost window so results are deterministic.  A value is typical when
it falls inside the closed interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .kstore import ALWAYS, KnowledgeBase, Triple
from .vocab import (
    ATYPICAL_QUALITY_VALUE,
    IS_CLASSIFY_BY,
    IS_QUALITY_OF,
    TYPICAL_QUALITY_VALUE,
    PropertyKind,
    quality_term,
)


class TypicalityError(ValueError):
    pass


class TypicalityLabel(str, Enum):
    TYPICAL = "Typical"
    ATYPICAL = "Atypical"


@dataclass(frozen=True)
class HdiInterval:
    lo: float
    hi: float
    k: int
    alpha: float
    property_kind: PropertyKind | None = None

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise TypicalityError(f"interval lo {self.lo} above hi {self.hi}")

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi


def empirical_hdi(
    sample: list[float],
    alpha: float,
    kind: PropertyKind | None = None,
) -> HdiInterval:
    """Sliding-window empirical HDI over the sorted sample.

    Sorting dominates the cost (O(n log n)); the window scan is linear.
    """
    if not sample:
        raise TypicalityError("empty sample")
    if not 0.0 < alpha < 1.0:
        raise TypicalityError(f"alpha must be inside (0, 1), got {alpha}")
    xs = sorted(float(x) for x in sample)
    if not math.isfinite(xs[0]) or not math.isfinite(xs[-1]):
        raise TypicalityError("sample contains non-finite values")
    n = len(xs)
    k = min(max(math.ceil(alpha * n), 1), n)
    best_start = 0
    best_width = math.inf
    for i in range(n - k + 1):
        width = xs[i + k - 1] - xs[i]
        if width < best_width:
            best_width = width
            best_start = i
    return HdiInterval(xs[best_start], xs[best_start + k - 1], k, alpha, kind)


def classify_value(iv: HdiInterval, v: float) -> TypicalityLabel:
    if not math.isfinite(v):
        raise TypicalityError(f"cannot classify non-finite value {v!r}")
    return TypicalityLabel.TYPICAL if iv.contains(v) else TypicalityLabel.ATYPICAL


def classify_corpus(
    kb: KnowledgeBase,
    props: list,
    alpha: float,
) -> dict[PropertyKind, HdiInterval]:
    """Compute one HDI per property kind and classify every quality entity.

    Asserts an ``isClassifyBy`` triple per quality, pointing at the typical or
    atypical quality-value concept.  The plans in ``props`` must already be
    grounded in ``kb``.
    """
    if not props:
        raise TypicalityError("no plan properties to classify")
    intervals = {
        kind: empirical_hdi([p.value(kind) for p in props], alpha, kind)
        for kind in PropertyKind
    }
    for p in props:
        for kind in PropertyKind:
            q = quality_term(p.plan_id, kind)
            if not kb.query(subject=q, predicate=IS_QUALITY_OF):
                raise TypicalityError(
                    f"plan {p.plan_id!r} has no grounded {kind.value} quality in the store"
                )
            label = classify_value(intervals[kind], p.value(kind))
            concept = (
                TYPICAL_QUALITY_VALUE
                if label is TypicalityLabel.TYPICAL
                else ATYPICAL_QUALITY_VALUE
            )
            kb.assert_triple(Triple(q, IS_CLASSIFY_BY, concept, ALWAYS))
    return intervals
