import itertools
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from joinbound import (
    ConstructionError,
    KabSet,
    family_size_from_beta,
    intersection_histogram,
    kab_construct,
    kab_verify,
)
from joinbound.kabset import hypergeometric_pmf, sample_family


def test_disjoint_pair_family_exists_and_is_found():
    # Exhaustive oracle over all C(4,2) = 6 subsets: some size-2 family with
    # intersections <= 1 exists (any two distinct pairs qualify).
    subsets = list(itertools.combinations(range(1, 5), 2))
    assert any(
        len(set(a) & set(b)) <= 1
        for a, b in itertools.combinations(subsets, 2)
    )
    kab = kab_construct(k=2, alpha=2, family_size=2, seed=123)
    assert kab_verify(kab.family, 2, 2).valid
    assert len(kab.family) == 2


def test_single_member_always_valid():
    kab = kab_construct(k=5, alpha=3, family_size=1, seed=9)
    assert kab_verify(kab.family, 5, 3).valid


def test_beta_helper_and_desk_example():
    assert family_size_from_beta(0.1, 12) == 2
    kab = kab_construct(k=12, alpha=4, family_size=2, seed=0)
    assert kab_verify(kab.family, 12, 4).valid


def test_verify_examples():
    assert kab_verify([{1, 2}, {3, 4}], 2, 2).valid
    # Intersection of size 1 equals floor(2/2): the threshold is inclusive.
    assert kab_verify([{1, 2}, {1, 3}], 2, 2).valid
    report = kab_verify([{1, 2, 3}, {1, 2, 4}], 3, 2)
    assert not report.valid
    assert report.witness == (0, 1)
    assert report.intersection_size == 2


def test_verify_malformed_inputs():
    assert not kab_verify([{1, 2, 3}], 2, 2).valid          # wrong size
    assert not kab_verify([{0, 1}], 2, 2).valid             # leaves universe
    assert not kab_verify([{1, 5}], 2, 2).valid             # above alpha*k
    assert not kab_verify([{1, 2}, {1, 2}], 2, 2).valid     # duplicate


def test_construct_determinism():
    a = kab_construct(k=8, alpha=4, family_size=6, seed=77)
    b = kab_construct(k=8, alpha=4, family_size=6, seed=77)
    assert a.family == b.family
    assert a.restarts == b.restarts
    c = kab_construct(k=8, alpha=4, family_size=6, seed=78)
    assert c.family != a.family


def test_construct_rejects_oversized_family():
    with pytest.raises(ValueError, match="exceeds"):
        kab_construct(k=2, alpha=2, family_size=7, seed=0)


def test_construct_failure_carries_best_family():
    # k=4, alpha=2: universe of 8; a family of 10 of the 70 subsets with all
    # intersections <= 2 is effectively impossible for whole-family sampling.
    with pytest.raises(ConstructionError) as exc_info:
        kab_construct(k=4, alpha=2, family_size=10, seed=5, max_restarts=5)
    best = exc_info.value.best_family
    assert 1 <= len(best) < 10
    assert kab_verify(best, 4, 2).valid


def test_intersection_histogram_trivial():
    assert intersection_histogram(KabSet(2, 2, [(1, 2)], 0)) == {}
    assert intersection_histogram(KabSet(2, 2, [(1, 2), (3, 4)], 0)) == {0: 1}
    three = KabSet(2, 3, [(1, 2), (3, 4), (5, 6)], 0)
    assert intersection_histogram(three) == {0: 3}


def test_histogram_totals_all_pairs():
    kab = kab_construct(k=6, alpha=3, family_size=8, seed=3)
    hist = intersection_histogram(kab)
    assert sum(hist.values()) == 8 * 7 // 2
    assert max(hist) <= 3


def test_random_pair_overlaps_follow_hypergeometric_law():
    # Conditional on one subset, the overlap with an independent uniform
    # subset is exactly hypergeometric, so all-pairs counts of a random
    # family are unbiased with binomial-scale noise per overlap size.
    k, alpha, fam = 8, 4, 600
    rng = np.random.default_rng(2024)
    family = sample_family(k, alpha, fam, rng)
    hist = intersection_histogram(KabSet(k, alpha, family, 2024))
    n_pairs = fam * (fam - 1) // 2
    assert sum(hist.values()) == n_pairs
    for l in range(0, k + 1):
        p = hypergeometric_pmf(alpha * k, k, l)
        expected = n_pairs * p
        sigma = (n_pairs * p * (1 - p)) ** 0.5
        assert abs(hist.get(l, 0) - expected) <= 5 * sigma + 1e-9, f"overlap {l}"


def test_pmf_sums_to_one():
    total = sum(hypergeometric_pmf(32, 8, l) for l in range(0, 9))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_larger_alpha_needs_fewer_restarts():
    # Median over seeds: a roomier universe (bigger alpha) makes rejection
    # succeed sooner for the same k and family size.
    def restarts(alpha, seed):
        return kab_construct(k=12, alpha=alpha, family_size=8, seed=seed,
                             max_restarts=2000).restarts

    seeds = range(30)
    tight = statistics.median(restarts(3, s) for s in seeds)
    roomy = statistics.median(restarts(6, s) for s in seeds)
    assert roomy <= tight


@given(st.integers(2, 6), st.integers(2, 4), st.integers(1, 4), st.integers(0, 10_000))
@settings(deadline=None, max_examples=40)
def test_construct_output_always_verifies(k, alpha, family_size, seed):
    try:
        kab = kab_construct(k, alpha, family_size, seed, max_restarts=200)
    except ConstructionError:
        return
    assert kab_verify(kab.family, k, alpha).valid
    assert len(kab.family) == family_size
