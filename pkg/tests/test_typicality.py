import math
import random
import time

import pytest
from hypothesis import given, settings, strategies as st

from planexp.experiences import PlanProperties, extract_properties, generate_synthetic, ground_properties
from planexp.kstore import KnowledgeBase
from planexp.typicality import (
    HdiInterval,
    TypicalityError,
    TypicalityLabel,
    classify_corpus,
    classify_value,
    empirical_hdi,
)
from planexp.vocab import (
    ATYPICAL_QUALITY_VALUE,
    IS_CLASSIFY_BY,
    TYPICAL_QUALITY_VALUE,
    PropertyKind,
    quality_term,
)

from conftest import PLAN_X, PLAN_Y


def brute_force_hdi(sample, alpha):
    """Exhaustive minimization over every k-window of the sorted sample."""
    xs = sorted(sample)
    n = len(xs)
    k = min(max(math.ceil(alpha * n), 1), n)
    best = None
    for i in range(n - k + 1):
        width = xs[i + k - 1] - xs[i]
        if best is None or width < best[0]:
            best = (width, xs[i], xs[i + k - 1])
    return k, best[1], best[2]


class TestEmpiricalHdi:
    def test_mode_window_wins(self):
        sample = [1, 2, 2, 2, 3, 10]
        k, lo, hi = brute_force_hdi(sample, 0.5)
        iv = empirical_hdi(sample, 0.5)
        assert (iv.k, iv.lo, iv.hi) == (k, lo, hi) == (3, 2, 2)

    def test_single_element(self):
        iv = empirical_hdi([5], 0.68)
        assert (iv.lo, iv.hi, iv.k) == (5, 5, 1)

    def test_window_spanning_whole_sample(self):
        iv = empirical_hdi([3, 7], 0.9)
        assert (iv.lo, iv.hi, iv.k) == (3, 7, 2)

    def test_window_size_at_reference_settings(self):
        iv = empirical_hdi(list(range(18)), 0.68)
        assert iv.k == 13

    def test_tie_breaks_leftmost(self):
        # Two width-0 windows exist; the scan must keep the first one.
        iv = empirical_hdi([1, 1, 5, 5], 0.5)
        assert (iv.lo, iv.hi) == (1, 1)

    def test_errors(self):
        with pytest.raises(TypicalityError):
            empirical_hdi([], 0.5)
        with pytest.raises(TypicalityError):
            empirical_hdi([1.0], 0.0)
        with pytest.raises(TypicalityError):
            empirical_hdi([1.0], 1.0)
        with pytest.raises(TypicalityError):
            empirical_hdi([1.0, float("nan")], 0.5)

    @given(
        st.lists(st.integers(-100, 100), min_size=1, max_size=50),
        st.sampled_from([0.3, 0.5, 0.68, 0.9]),
    )
    def test_matches_brute_force(self, sample, alpha):
        k, lo, hi = brute_force_hdi(sample, alpha)
        iv = empirical_hdi(sample, alpha)
        assert (iv.k, iv.lo, iv.hi) == (k, lo, hi)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40), st.floats(0.05, 0.95))
    def test_coverage_at_least_k(self, sample, alpha):
        iv = empirical_hdi(sample, alpha)
        inside = sum(1 for x in sample if iv.lo <= x <= iv.hi)
        assert inside >= iv.k

    def test_unique_mode_inside_interval(self):
        # The mode occurs n_rest + 2 times, any other value at most n_rest
        # times, and k = n_rest + 1, so the mode's multiplicity covers a full
        # window and must land inside the interval.
        rng = random.Random(3)
        for _ in range(200):
            n_rest = rng.randint(0, 10)
            mode = rng.randint(-5, 5)
            sample = [rng.randint(-50, 50) for _ in range(n_rest)] + [mode] * (n_rest + 2)
            iv = empirical_hdi(sample, 0.5)
            assert iv.lo <= mode <= iv.hi

    @given(
        st.lists(st.integers(-50, 50), min_size=2, max_size=30),
        st.floats(0.2, 0.9),
        st.integers(1, 9),
        st.integers(-20, 20),
    )
    @settings(max_examples=100)
    def test_shift_scale_equivariance(self, sample, alpha, a, b):
        # Integer transforms keep window-width ties exact; an inexact scale
        # factor may legitimately flip a tie to a different equal-width window.
        base = empirical_hdi(sample, alpha)
        scaled = empirical_hdi([a * x + b for x in sample], alpha)
        assert scaled.lo == a * base.lo + b
        assert scaled.hi == a * base.hi + b

    def test_large_sample_runtime(self):
        rng = random.Random(0)
        sample = [rng.random() for _ in range(1_000_000)]
        start = time.monotonic()
        empirical_hdi(sample, 0.68)
        assert time.monotonic() - start < 10.0


class TestClassifyValue:
    def test_boundary_is_typical(self):
        iv = HdiInterval(2, 2, 3, 0.5)
        assert classify_value(iv, 2) is TypicalityLabel.TYPICAL

    def test_outside_is_atypical(self):
        k, lo, hi = brute_force_hdi([1, 2, 2, 2, 3, 10], 0.5)
        iv = HdiInterval(lo, hi, k, 0.5)
        assert classify_value(iv, 10) is TypicalityLabel.ATYPICAL

    def test_upper_boundary(self):
        assert classify_value(HdiInterval(3, 7, 2, 0.9), 7) is TypicalityLabel.TYPICAL

    def test_non_finite_rejected(self):
        with pytest.raises(TypicalityError):
            classify_value(HdiInterval(0, 1, 1, 0.5), float("nan"))


class TestClassifyCorpus:
    def _grounded(self, props):
        kb = KnowledgeBase()
        for p in props:
            ground_properties(kb, p)
        return kb

    def test_each_interval_covers_at_least_k(self):
        props = [extract_properties(r) for r in generate_synthetic(42, 18)]
        kb = self._grounded(props)
        intervals = classify_corpus(kb, props, 0.68)
        for kind, iv in intervals.items():
            assert iv.k == 13
            values = [p.value(kind) for p in props]
            assert sum(1 for v in values if iv.lo <= v <= iv.hi) >= 13

    def test_identical_plans_all_typical(self):
        props = [PlanProperties(f"P{i}", 12, 30.0, 1) for i in range(6)]
        kb = self._grounded(props)
        intervals = classify_corpus(kb, props, 0.68)
        for iv in intervals.values():
            assert iv.lo == iv.hi
        atypical = kb.query(predicate=IS_CLASSIFY_BY, object=ATYPICAL_QUALITY_VALUE)
        assert atypical == []
        assert len(kb.query(predicate=IS_CLASSIFY_BY, object=TYPICAL_QUALITY_VALUE)) == 18

    def test_two_plan_corpus_everything_typical(self):
        props = [PLAN_X, PLAN_Y]
        kb = self._grounded(props)
        intervals = classify_corpus(kb, props, 0.68)
        for kind, iv in intervals.items():
            assert iv.k == 2
            for p in props:
                label = classify_value(iv, p.value(kind))
                assert label is TypicalityLabel.TYPICAL

    def test_classification_triples_match_interval_membership(self):
        props = [extract_properties(r) for r in generate_synthetic(7, 12)]
        kb = self._grounded(props)
        intervals = classify_corpus(kb, props, 0.5)
        for p in props:
            for kind in PropertyKind:
                found = kb.query(subject=quality_term(p.plan_id, kind), predicate=IS_CLASSIFY_BY)
                assert len(found) == 1
                expected = (
                    TYPICAL_QUALITY_VALUE
                    if intervals[kind].contains(p.value(kind))
                    else ATYPICAL_QUALITY_VALUE
                )
                assert found[0].object == expected

    def test_missing_quality_entities_rejected(self):
        kb = KnowledgeBase()
        with pytest.raises(TypicalityError):
            classify_corpus(kb, [PLAN_X], 0.68)

    def test_empty_props_rejected(self):
        with pytest.raises(TypicalityError):
            classify_corpus(KnowledgeBase(), [], 0.68)
