"""Numeric core: binary entropy, capacity constants, and closed-form lower bounds.

Everything here is a pure function of its arguments, computed in double
precision.  Bits are returned as reals; callers that need an integer budget
should floor them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the function."""


class PreconditionError(ValueError):
    """A side condition of the requested bound is violated; the message names it."""


class QueryKind(str, Enum):
    COUNT2 = "COUNT2"
    COUNTP = "COUNTP"
    SUM = "SUM"
    COUNT_DISTINCT = "COUNT_DISTINCT"
    GROUP_BY = "GROUP_BY"
    PKFK_COUNT = "PKFK_COUNT"
    PKFK_GROUP_BY = "PKFK_GROUP_BY"
    HEAVY_HITTER = "HEAVY_HITTER"
    CHAIN4 = "CHAIN4"


# Error probability must stay below this for the capacity constants to be defined.
DELTA_CEILING = 0.0625


@dataclass(frozen=True)
class BoundParams:
    """Inputs to the closed-form lower bounds.

    ``table_sizes`` conventions by kind:
      COUNT2 / COUNTP / SUM : (n1, ..., np), the generator places the set-design
                              on the last (largest) table;
      COUNT_DISTINCT        : (companion sizes..., n) with the distinct-bearing
                              table last;
      GROUP_BY              : (n1, ..., np), bound uses the maximum;
      PKFK_*                : (dimension sizes..., n_fact) with the fact table
                              last, bound uses the largest dimension;
      HEAVY_HITTER          : (n1, n2) exclusive of the heavy-hitter masses;
      CHAIN4                : four equal sizes (or a single n).

    ``B`` is the a-priori floor on the query answer.  ``sum_max`` is the
    maximum value on the SUM column (SUM only).  ``lam`` is the group-size
    multiplier (GROUP_BY only).  ``hh_a`` / ``hh_b`` are the known descending
    top-K frequency vectors (HEAVY_HITTER only).
    """

    query_kind: QueryKind
    table_sizes: tuple[int, ...]
    epsilon: float
    delta: float
    B: float
    sum_max: float | None = None
    lam: float | None = None
    hh_a: tuple[int, ...] | None = None
    hh_b: tuple[int, ...] | None = None
    snap_note: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "query_kind", QueryKind(self.query_kind))
        object.__setattr__(self, "table_sizes", tuple(int(n) for n in self.table_sizes))
        if not self.table_sizes or any(n <= 0 for n in self.table_sizes):
            raise DomainError("table_sizes must be positive integers")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if not 0 < self.delta < DELTA_CEILING:
            raise DomainError(f"delta must lie in (0, {DELTA_CEILING})")
        if not self.B > 0:
            raise DomainError("B must be positive")
        for name in ("hh_a", "hh_b"):
            vec = getattr(self, name)
            if vec is not None:
                vec = tuple(int(v) for v in vec)
                object.__setattr__(self, name, vec)
                if not vec or vec[-1] < 1 or any(a < b for a, b in zip(vec, vec[1:])):
                    raise DomainError(f"{name} must be non-increasing with minimum >= 1")
        if self.lam is not None and self.lam < 1:
            raise DomainError("lam must be >= 1")
        if self.sum_max is not None and not self.sum_max > 0:
            raise DomainError("sum_max must be positive")

    @property
    def eps_factor(self) -> float:
        """The recurring (epsilon^2 + 2*epsilon) slack factor."""
        return self.epsilon * self.epsilon + 2.0 * self.epsilon


@dataclass
class BoundResult:
    """A lower bound in bits plus the intermediate quantities behind it."""

    bits: float
    derived: dict = field(default_factory=dict)

    @property
    def bits_floor(self) -> int:
        return max(0, math.floor(self.bits))


def binary_entropy(p: float) -> float:
    """Binary entropy -p*log2(p) - (1-p)*log2(1-p), with 0*log0 taken as 0."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"binary_entropy requires p in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def capacity_C(delta: float) -> float:
    """Capacity constant for error probability delta < 1/16.

    C(delta) = [H(8d) - (1-8d) * H(4d / (1-8d))] / (16d) - 1/2, strictly
    positive and strictly decreasing on the open domain, vanishing as delta
    approaches 1/16.
    """
    if not 0.0 < delta < DELTA_CEILING:
        raise DomainError(f"capacity_C requires 0 < delta < {DELTA_CEILING}, got {delta}")
    d8 = 8.0 * delta
    num = binary_entropy(d8) - (1.0 - d8) * binary_entropy(4.0 * delta / (1.0 - d8))
    return num / (16.0 * delta) - 0.5


def capacity_Cprime(delta: float) -> float:
    """The rescaled capacity 8*delta*C(delta) used by the per-key bounds."""
    return 8.0 * delta * capacity_C(delta)


def beta_bound(alpha: float) -> float:
    """Feasibility ceiling on the design exponent beta for universe ratio alpha.

    Returns (alpha*H(1/alpha) - (alpha-1)*H(1/(2*(alpha-1))) - 1) / 2.  Any
    beta strictly below this admits arbitrarily large intersection-bounded
    set designs; at alpha = 2 the ceiling is exactly 0.
    """
    if alpha < 2:
        raise DomainError(f"beta_bound requires alpha >= 2, got {alpha}")
    return 0.5 * (
        alpha * binary_entropy(1.0 / alpha)
        - (alpha - 1.0) * binary_entropy(1.0 / (2.0 * (alpha - 1.0)))
        - 1.0
    )


def _require(cond: bool, inequality: str):
    if not cond:
        raise PreconditionError(f"violated precondition: {inequality}")


def _count_like(params: BoundParams, sum_max: float | None):
    """Shared arithmetic for the COUNT / SUM families; returns (bits, derived)."""
    sizes = params.table_sizes
    p = len(sizes)
    _require(p >= 2, "at least two tables are required")
    M = 1.0 if sum_max is None else float(sum_max)
    prod_n = math.prod(sizes)
    _require(
        params.B < M * prod_n / (1.0 + params.epsilon) ** 2,
        f"B < {'M * ' if sum_max is not None else ''}prod(n_i) / (1+eps)^2",
    )
    shrink = (params.B / (M * prod_n)) ** (1.0 / p)
    m = tuple(n * (1.0 - shrink) for n in sizes)
    ef = params.eps_factor
    second = M * math.prod(m) / (ef * params.B)
    k = min(max(m), second)
    cap = capacity_C(params.delta)
    bits = cap / 2.0 * k
    derived = {
        "m": m,
        "k": k,
        "t": k / (8.0 * params.delta),
        "alpha": 1.0 / (8.0 * params.delta),
        "capacity": cap,
        "capacity_kind": "C",
        "min_args": (max(m), second),
    }
    return bits, derived


def lower_bound(params: BoundParams) -> BoundResult:
    """Closed-form lower bound, in bits, on per-relation summary length.

    Dispatches on ``params.query_kind``.  Raises :class:`PreconditionError`
    naming the failing inequality when the requested parameters fall outside
    the bound's validity region.  The returned ``derived`` record carries the
    intermediate quantities (m_i, k, t = k/(8*delta), alpha = 1/(8*delta),
    and the capacity constant used).
    """
    kind = params.query_kind
    d = params.delta
    ef = params.eps_factor

    if kind is QueryKind.COUNT2:
        _require(len(params.table_sizes) == 2, "COUNT2 takes exactly two table sizes")
        bits, derived = _count_like(params, None)
        return BoundResult(bits, derived)

    if kind is QueryKind.COUNTP:
        bits, derived = _count_like(params, None)
        return BoundResult(bits, derived)

    if kind is QueryKind.SUM:
        _require(params.sum_max is not None, "SUM requires sum_max (maximum of the SUM column)")
        bits, derived = _count_like(params, params.sum_max)
        return BoundResult(bits, derived)

    if kind is QueryKind.COUNT_DISTINCT:
        n = params.table_sizes[-1]
        _require(len(params.table_sizes) >= 2, "at least two tables are required")
        _require(n > (1.0 + params.epsilon) ** 2 * params.B, "n > (1+eps)^2 * B")
        k = (n - params.B) * min(1.0, 1.0 / (ef * params.B))
        cap = capacity_C(d)
        return BoundResult(
            cap / 2.0 * k,
            {"k": k, "t": k / (8.0 * d), "alpha": 1.0 / (8.0 * d), "capacity": cap,
             "capacity_kind": "C", "n": n},
        )

    if kind is QueryKind.GROUP_BY:
        _require(params.lam is not None, "GROUP_BY requires lam >= 1")
        n_max = max(params.table_sizes)
        k = n_max / params.lam
        cap = capacity_C(d)
        return BoundResult(
            cap / 2.0 * k,
            {"k": k, "t": k / (8.0 * d), "alpha": 1.0 / (8.0 * d), "capacity": cap,
             "capacity_kind": "C", "n_max": n_max},
        )

    if kind in (QueryKind.PKFK_COUNT, QueryKind.PKFK_GROUP_BY):
        _require(len(params.table_sizes) >= 2, "PKFK takes dimension sizes plus a fact size")
        n_dim = max(params.table_sizes[:-1])
        n_fact = params.table_sizes[-1]
        capp = capacity_Cprime(d)
        if kind is QueryKind.PKFK_COUNT:
            _require(params.B < n_fact / (1.0 + params.epsilon) ** 2, "B < n_F / (1+eps)^2")
            k = 8.0 * d * (n_dim - 1)
            bits = capp / 2.0 * (n_dim - 1)
            t = n_dim - 1
        else:
            k = 8.0 * d * n_dim
            bits = capp / 2.0 * n_dim
            t = n_dim
        return BoundResult(
            bits,
            {"k": k, "t": t, "alpha": 1.0 / (8.0 * d), "capacity": capp,
             "capacity_kind": "Cprime", "n_dim": n_dim, "n_fact": n_fact},
        )

    if kind is QueryKind.HEAVY_HITTER:
        _require(params.hh_a is not None and params.hh_b is not None,
                 "HEAVY_HITTER requires hh_a and hh_b")
        _require(len(params.table_sizes) == 2, "HEAVY_HITTER takes exactly two table sizes")
        n1, n2 = params.table_sizes
        aK, bK = params.hh_a[-1], params.hh_b[-1]
        _require(aK * bK >= ef * params.B, "a_K * b_K >= (eps^2 + 2*eps) * B")
        guard = max(2.0, 1.0 + 1.0 / ef)
        _require(n1 >= guard * aK, "n1 >= max(2, 1 + 1/(eps^2+2*eps)) * a_K")
        _require(n2 >= guard * bK, "n2 >= max(2, 1 + 1/(eps^2+2*eps)) * b_K")
        m1 = n1 - params.B / bK
        m2 = n2 - params.B / aK
        side1 = m1 * min(1.0, bK / (ef * params.B))
        side2 = m2 * min(1.0, aK / (ef * params.B))
        k = max(side1, side2)
        cap = capacity_C(d)
        return BoundResult(
            cap / 2.0 * k,
            {"m": (m1, m2), "k": k, "t": k / (8.0 * d), "alpha": 1.0 / (8.0 * d),
             "capacity": cap, "capacity_kind": "C", "sides": (side1, side2)},
        )

    if kind is QueryKind.CHAIN4:
        sizes = set(params.table_sizes)
        _require(len(sizes) == 1, "CHAIN4 requires equal table sizes")
        n = params.table_sizes[0]
        _require(params.B <= n * n / ef, "B <= n^2 / (eps^2 + 2*eps)")
        x = n - math.sqrt(ef * params.B)
        _require(x > 0, "n - sqrt((eps^2+2*eps) * B) > 0")
        y = math.sqrt(params.B) / x
        k = 8.0 * d * (n - y)
        capp = capacity_Cprime(d)
        return BoundResult(
            capp / 2.0 * (n - y),
            {"k": k, "t": n - y, "alpha": 1.0 / (8.0 * d), "capacity": capp,
             "capacity_kind": "Cprime", "x": x, "y": y},
        )

    raise DomainError(f"unknown query kind {kind!r}")
