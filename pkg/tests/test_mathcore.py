import math

import pytest
from hypothesis import given, settings, strategies as st

from joinbound import (
    BoundParams,
    DomainError,
    PreconditionError,
    QueryKind,
    beta_bound,
    binary_entropy,
    capacity_C,
    capacity_Cprime,
    lower_bound,
)

# Frozen with mpmath at 40 digits: -(1/4)log2(1/4) - (3/4)log2(3/4).
H_QUARTER = 0.8112781244591328
# Frozen with mpmath: (4H(1/4) - 3H(1/6) - 1) / 2.
BETA_BOUND_4 = 0.1475226164457344


def test_entropy_examples():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.25) == pytest.approx(H_QUARTER, abs=1e-15)


def test_entropy_domain():
    with pytest.raises(DomainError):
        binary_entropy(-0.001)
    with pytest.raises(DomainError):
        binary_entropy(1.001)


@given(st.floats(0.0, 1.0))
@settings(deadline=None)
def test_entropy_symmetry(p):
    assert binary_entropy(p) == pytest.approx(binary_entropy(1.0 - p), abs=1e-12)
    assert 0.0 <= binary_entropy(p) <= 1.0 + 1e-12


def test_entropy_concavity_midpoints():
    grid = [i / 200 for i in range(1, 200)]
    for a, b in zip(grid, grid[2:]):
        mid = (a + b) / 2
        assert binary_entropy(mid) >= (binary_entropy(a) + binary_entropy(b)) / 2 - 1e-12


def test_capacity_paper_remarks():
    assert capacity_C(0.05) > 1 / 50
    assert capacity_C(0.01) > 1 / 2
    assert capacity_Cprime(0.05) > 1 / 125
    assert capacity_Cprime(0.01) > 1 / 25


def test_capacity_boundary_vanishes():
    assert capacity_C(0.0625 - 1e-12) == pytest.approx(0.0, abs=1e-6)


def test_capacity_domain():
    for bad in (0.0, -0.01, 0.0625, 0.1):
        with pytest.raises(DomainError):
            capacity_C(bad)
        with pytest.raises(DomainError):
            capacity_Cprime(bad)


def test_capacity_positive_and_decreasing_on_grid():
    grid = [i / 1000 for i in range(1, 63)]
    values = [capacity_C(d) for d in grid]
    assert all(v > 0 for v in values)
    assert all(a > b for a, b in zip(values, values[1:]))


def test_cprime_definitional_identity():
    for d in (0.001, 0.013, 0.05, 0.0624):
        assert capacity_Cprime(d) == 8 * d * capacity_C(d)


def test_beta_bound_examples():
    assert beta_bound(2) == pytest.approx(0.0, abs=1e-12)
    assert beta_bound(4) == pytest.approx(BETA_BOUND_4, abs=1e-15)
    with pytest.raises(DomainError):
        beta_bound(1.9)


def test_beta_bound_capacity_identity_grid():
    # Independent substitution: alpha = 1/(8 delta) turns the design ceiling
    # into the capacity constant.
    d = 0.001
    while d < 0.0625 - 1e-12:
        assert abs(beta_bound(1.0 / (8.0 * d)) - capacity_C(d)) < 1e-9
        d += 0.0001


def test_lower_bound_count2_example():
    params = BoundParams(QueryKind.COUNT2, (100, 100), 1.0, 0.01, 100.0)
    res = lower_bound(params)
    assert res.bits == pytest.approx(13.5 * capacity_C(0.01), rel=1e-12)
    m = res.derived["m"]
    assert m[0] == pytest.approx(90.0, abs=1e-9)
    assert m[1] == pytest.approx(90.0, abs=1e-9)
    assert res.derived["k"] == pytest.approx(27.0, abs=1e-9)
    assert res.derived["t"] == pytest.approx(27.0 / 0.08, rel=1e-12)
    assert res.derived["alpha"] == pytest.approx(12.5, rel=1e-12)
    assert res.bits_floor == math.floor(res.bits)


def test_lower_bound_vanishes_near_delta_ceiling():
    params = BoundParams(QueryKind.COUNT2, (100, 100), 1.0, 0.0625 - 1e-12, 100.0)
    assert lower_bound(params).bits == pytest.approx(0.0, abs=1e-3)


def test_lower_bound_pkfk_example():
    params = BoundParams(QueryKind.PKFK_COUNT, (101, 100000), 1.0, 0.01, 100.0)
    res = lower_bound(params)
    assert res.bits == pytest.approx(50 * capacity_Cprime(0.01), rel=1e-12)
    assert res.bits > 2
    assert res.derived["capacity_kind"] == "Cprime"


def test_countp_p2_matches_count2():
    for n1, n2, B in [(100, 100, 100), (60, 80, 12), (50, 200, 300)]:
        a = lower_bound(BoundParams(QueryKind.COUNT2, (n1, n2), 1.0, 0.02, float(B)))
        b = lower_bound(BoundParams(QueryKind.COUNTP, (n1, n2), 1.0, 0.02, float(B)))
        assert abs(a.bits - b.bits) < 1e-9


def test_count2_monotone_in_B_where_second_arg_active():
    # In the regime where prod(m)/((eps^2+2eps)B) is the active minimum the
    # bound must not increase with B.
    prev = None
    for B in range(50, 500, 10):
        params = BoundParams(QueryKind.COUNT2, (100, 100), 1.0, 0.01, float(B))
        res = lower_bound(params)
        second_active = res.derived["min_args"][1] <= res.derived["min_args"][0]
        if second_active and prev is not None:
            assert res.bits <= prev + 1e-9
        prev = res.bits


def test_count2_continuous_at_min_threshold():
    # Threshold where the two min arguments cross: m1 = (eps^2+2eps) B.
    n = 100.0
    eps = 1.0
    delta = 0.01

    def bits(B):
        return lower_bound(BoundParams(QueryKind.COUNT2, (100, 100), eps, delta, B)).bits

    # Solve m(B) = 3B numerically for the crossing floor.
    lo, hi = 1.0, n * n / 4 - 1
    for _ in range(200):
        mid = (lo + hi) / 2
        m = n * (1 - math.sqrt(mid / (n * n)))
        if m > 3 * mid:
            lo = mid
        else:
            hi = mid
    Bstar = (lo + hi) / 2
    eps_b = Bstar * 1e-9
    assert abs(bits(Bstar - eps_b) - bits(Bstar + eps_b)) < 1e-6


def test_sum_requires_sum_max_and_scales():
    with pytest.raises(PreconditionError):
        lower_bound(BoundParams(QueryKind.SUM, (100, 100), 1.0, 0.01, 100.0))
    res = lower_bound(BoundParams(QueryKind.SUM, (100, 100), 1.0, 0.01, 100.0, sum_max=1))
    ref = lower_bound(BoundParams(QueryKind.COUNT2, (100, 100), 1.0, 0.01, 100.0))
    assert abs(res.bits - ref.bits) < 1e-9


def test_count_distinct_bound():
    params = BoundParams(QueryKind.COUNT_DISTINCT, (2, 10), 1.0, 0.05, 1.0)
    res = lower_bound(params)
    assert res.derived["k"] == pytest.approx(3.0, abs=1e-12)
    assert res.bits == pytest.approx(1.5 * capacity_C(0.05), rel=1e-12)
    with pytest.raises(PreconditionError, match=r"n > \(1\+eps\)\^2"):
        lower_bound(BoundParams(QueryKind.COUNT_DISTINCT, (2, 10), 1.0, 0.05, 3.0))


def test_group_by_bound_uses_max_size_over_lam():
    params = BoundParams(QueryKind.GROUP_BY, (40, 100), 1.0, 0.05, 1.0, lam=4)
    res = lower_bound(params)
    assert res.bits == pytest.approx(capacity_C(0.05) / 2 * 25, rel=1e-12)


def test_pkfk_star_uses_max_dimension():
    single = lower_bound(BoundParams(QueryKind.PKFK_COUNT, (101, 100000), 1.0, 0.01, 100.0))
    star = lower_bound(BoundParams(QueryKind.PKFK_COUNT, (50, 101, 7, 100000), 1.0, 0.01, 100.0))
    assert star.bits == single.bits


def test_heavy_hitter_bound_and_preconditions():
    params = BoundParams(QueryKind.HEAVY_HITTER, (8, 10), 1.0, 0.05, 4.0,
                         hh_a=(4,), hh_b=(4,))
    res = lower_bound(params)
    # m2 = 10 - 4/4 = 9, side2 = 9 * min(1, 4/12) = 3; m1 = 8 - 1 = 7, side1 = 7/3.
    assert res.derived["k"] == pytest.approx(3.0, rel=1e-12)
    assert res.bits == pytest.approx(1.5 * capacity_C(0.05), rel=1e-12)
    with pytest.raises(PreconditionError, match="a_K \\* b_K"):
        lower_bound(BoundParams(QueryKind.HEAVY_HITTER, (8, 10), 1.0, 0.05, 10.0,
                                hh_a=(4,), hh_b=(4,)))
    with pytest.raises(PreconditionError, match="n1 >="):
        lower_bound(BoundParams(QueryKind.HEAVY_HITTER, (7, 10), 1.0, 0.05, 4.0,
                                hh_a=(4,), hh_b=(4,)))


def test_chain4_bound_and_precondition():
    import math as _math
    eps = _math.sqrt(1.25) - 1
    params = BoundParams(QueryKind.CHAIN4, (6, 6, 6, 6), eps, 0.05, 16.0)
    res = lower_bound(params)
    assert res.derived["x"] == pytest.approx(4.0, rel=1e-9)
    assert res.derived["y"] == pytest.approx(1.0, rel=1e-9)
    assert res.bits == pytest.approx(capacity_Cprime(0.05) / 2 * 5, rel=1e-9)
    with pytest.raises(PreconditionError, match="n\\^2"):
        lower_bound(BoundParams(QueryKind.CHAIN4, (6, 6, 6, 6), eps, 0.05, 200.0))


def test_b_ceiling_named_errors():
    with pytest.raises(PreconditionError, match="B <"):
        lower_bound(BoundParams(QueryKind.COUNT2, (10, 10), 1.0, 0.01, 30.0))
    with pytest.raises(PreconditionError, match="B < n_F"):
        lower_bound(BoundParams(QueryKind.PKFK_COUNT, (5, 8), 1.0, 0.01, 4.0))


def test_params_validation():
    with pytest.raises(DomainError):
        BoundParams(QueryKind.COUNT2, (10, 10), 1.0, 0.07, 5.0)
    with pytest.raises(DomainError):
        BoundParams(QueryKind.COUNT2, (10, 10), -1.0, 0.01, 5.0)
    with pytest.raises(DomainError):
        BoundParams(QueryKind.COUNT2, (10, 0), 1.0, 0.01, 5.0)
    with pytest.raises(DomainError):
        BoundParams(QueryKind.HEAVY_HITTER, (8, 10), 1.0, 0.01, 4.0,
                    hh_a=(3, 4), hh_b=(4, 4))
