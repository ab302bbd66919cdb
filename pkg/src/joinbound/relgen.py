"""Generators for paired hard database instances.

Each generator emits an :class:`AdversarialInstance`: a set of relations plus
a join query whose exact answer is pinned to one of two values by a hidden
branch draw — the answer floor B (branch miss) or at least (1+eps)^2 * B
(branch hit).  Group-by kinds replace the value dichotomy with group-absent
versus one group of a stated size.  All per-column frequency multisets are
invariant across the hidden draw, so nothing marginal betrays the branch.

Instances use non-negative integer values with 0 reserved as the join type
whose cross product realizes the floor B.  Fresh (non-joining) values are
allocated from the range above the type set and recorded in the spec extras.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .kabset import KabSet, kab_construct
from .mathcore import BoundParams, PreconditionError, QueryKind
from .reldata import Aggregate, AggKind, JoinQuery, Relation, Topology


class SnapError(ValueError):
    """No nearby integral parameter tuple exists; message lists the offenders."""


class InstanceInfeasible(ValueError):
    """The (snapped) parameters cannot realize the requested construction."""


@dataclass
class AdversarialSpec:
    """Provenance of a generated instance: parameters, design, and branch draw.

    ``branch_value`` is the hidden draw (the type v, or the position of the
    marked row for CHAIN4); it is 0 for PKFK_COUNT, which has no single draw.
    ``extra`` records realized quantities: block sizes, value ranges, the
    drawn subset S, per-key fact frequencies, and the design table's name.
    """

    kind: QueryKind
    params: BoundParams
    k: int
    t: int
    kab: KabSet | None
    branch_value: int
    seed: int
    extra: dict = field(default_factory=dict)


@dataclass
class AdversarialInstance:
    relations: list[Relation]
    query: JoinQuery
    truth_low: float
    truth_high: float
    branch_hit: bool
    spec: AdversarialSpec

    @property
    def truth(self) -> float:
        return self.truth_high if self.branch_hit else self.truth_low

    def relation(self, name: str) -> Relation:
        for rel in self.relations:
            if rel.name == name:
                return rel
        raise KeyError(name)


# ---------------------------------------------------------------------------
# integrality bookkeeping


_INT_TOL = 1e-9


def _as_int(x: float, name: str, problems: list[str]) -> int:
    r = round(x)
    if abs(x - r) > _INT_TOL * max(1.0, abs(x)):
        problems.append(f"{name} = {x} is not an integer")
        return 0
    return int(r)


def _count_family_quantities(params: BoundParams, B: float, k: int | None) -> tuple[list[str], dict]:
    """Integrality problems and realized quantities for COUNT2/COUNTP/SUM."""
    problems: list[str] = []
    sizes = params.table_sizes
    p = len(sizes)
    M = 1
    if params.query_kind is QueryKind.SUM:
        if params.sum_max is None:
            return ["sum_max missing for SUM"], {}
        M = _as_int(params.sum_max, "sum_max", problems)
        if M < 1:
            problems.append("sum_max must be >= 1")
    prod_n = math.prod(sizes)
    if not B < M * prod_n / (1.0 + params.epsilon) ** 2:
        problems.append("B < M * prod(n_i) / (1+eps)^2 fails")
    shrink = (B / (M * prod_n)) ** (1.0 / p)
    tails = [_as_int(n * shrink, f"tail_{i+1} = n_{i+1} * (B/(M*prod n))^(1/p)", problems)
             for i, n in enumerate(sizes)]
    m = [n - t for n, t in zip(sizes, tails)]
    if not problems:
        if any(t < 1 for t in tails):
            problems.append("every type-0 tail must have at least one row")
        if any(mi < 1 for mi in m):
            problems.append("every m_i must be at least 1")
        if math.prod(tails) * M != round(B):
            problems.append("prod(tails) * M != B")
    if k is not None and not problems:
        if k < 1 or m[-1] % k != 0:
            problems.append(f"k = {k} must divide m_p = {m[-1]}")
    return problems, {"tails": tails, "m": m, "M": M}


def _count_distinct_quantities(params: BoundParams, B: float, k: int | None):
    problems: list[str] = []
    n = params.table_sizes[-1]
    Bi = _as_int(B, "B", problems)
    if not n > (1.0 + params.epsilon) ** 2 * B:
        problems.append("n > (1+eps)^2 * B fails")
    if not problems and n - Bi < 1:
        problems.append("n - B must be >= 1")
    k_eff = k
    if k_eff is None and not problems:
        k_eff = _as_int((n - Bi) * min(1.0, 1.0 / (params.eps_factor * B)),
                        "k = (n-B) * min(1, 1/((eps^2+2eps)B))", problems)
    if not problems:
        if k_eff < 1:
            problems.append("k must be >= 1")
        elif (n - Bi) % k_eff != 0:
            problems.append(f"k = {k_eff} must divide n - B = {n - Bi}")
    return problems, {"n": n, "B": Bi, "k": k_eff}


def _pkfk_quantities(params: BoundParams, B: float, k: int | None, group_by: bool):
    problems: list[str] = []
    n_dim, n_fact = params.table_sizes[0], params.table_sizes[-1]
    Bi = _as_int(B, "B", problems)
    if not group_by:
        if not B < n_fact / (1.0 + params.epsilon) ** 2:
            problems.append("B < n_F / (1+eps)^2 fails")
        if n_fact - Bi < 1:
            problems.append("n_F - B must be >= 1")
    t = n_dim if group_by else n_dim - 1
    k_eff = k
    if k_eff is None:
        k_eff = _as_int(8.0 * params.delta * t, "k = 8*delta*t", problems)
    if not problems and not 1 <= k_eff <= t:
        problems.append(f"k = {k_eff} must lie in 1..{t}")
    return problems, {"t": t, "k": k_eff, "B": Bi}


def _heavy_hitter_quantities(params: BoundParams, B: float, k: int | None):
    problems: list[str] = []
    if params.hh_a is None or params.hh_b is None:
        return ["hh_a / hh_b missing"], {}
    n1, n2 = params.table_sizes
    aK, bK = params.hh_a[-1], params.hh_b[-1]
    ef = params.eps_factor
    if not aK * bK >= ef * B - _INT_TOL:
        problems.append("a_K * b_K >= (eps^2+2eps) * B fails")
    guard = max(2.0, 1.0 + 1.0 / ef)
    if not n1 >= guard * aK - _INT_TOL:
        problems.append("n1 >= max(2, 1 + 1/(eps^2+2eps)) * a_K fails")
    if not n2 >= guard * bK - _INT_TOL:
        problems.append("n2 >= max(2, 1 + 1/(eps^2+2eps)) * b_K fails")
    Bi = _as_int(B, "B", problems)
    over_ab = _as_int(B / aK, "B / a_K", problems)
    over_bb = _as_int(B / bK, "B / b_K", problems)
    bridged = Bi >= aK * bK
    if bridged:
        _as_int(B / (aK * bK), "B / (a_K * b_K)", problems)
    if problems:
        return problems, {}
    m2 = n2 - over_ab
    m1 = n1 - over_bb
    if m2 < 1:
        problems.append("m2 = n2 - B/a_K must be >= 1")
    k_eff = k
    if k_eff is None:
        k_eff = _as_int(m2 * min(1.0, aK / (ef * B)),
                        "k = m2 * min(1, a_K/((eps^2+2eps)B))", problems)
    if not problems:
        if k_eff < 1 or m2 % k_eff != 0:
            problems.append(f"k = {k_eff} must divide m2 = {m2}")
        else:
            block = m2 // k_eff
            if block > bK:
                problems.append(f"design block size {block} exceeds b_K = {bK}")
    part3_r1 = over_bb if bridged else aK
    if aK + part3_r1 > n1:
        problems.append("n1 cannot host the marked block plus the floor-realizing block")
    return problems, {"m1": m1, "m2": m2, "k": k_eff, "B": Bi, "bridged": bridged,
                      "part3_r1": part3_r1}


def _chain4_quantities(params: BoundParams, B: float, k: int | None):
    problems: list[str] = []
    n = params.table_sizes[0]
    ef = params.eps_factor
    if B > n * n / ef + _INT_TOL:
        problems.append("B <= n^2 / (eps^2+2eps) fails")
    Bi = _as_int(B, "B", problems)
    q2 = _as_int(ef * B, "(eps^2+2eps) * B", problems)
    if problems:
        return problems, {}
    sx = math.isqrt(q2)
    if sx * sx != q2:
        problems.append(f"(eps^2+2eps)*B = {q2} is not a perfect square")
    sb = math.isqrt(Bi)
    if sb * sb != Bi:
        problems.append(f"B = {Bi} is not a perfect square")
    if problems:
        return problems, {}
    x = n - sx
    if x < 1:
        problems.append("x = n - sqrt((eps^2+2eps)B) must be >= 1")
    elif sb % x != 0:
        problems.append(f"y = sqrt(B)/x = {sb}/{x} is not an integer")
    if problems:
        return problems, {}
    y = sb // x
    if y < 1 or y >= n:
        problems.append("y must lie in 1..n-1")
    k_eff = k
    if k_eff is None:
        k_eff = _as_int(8.0 * params.delta * (n - y), "k = 8*delta*(n-y)", problems)
    if not problems and not 1 <= k_eff <= n - y:
        problems.append(f"k = {k_eff} must lie in 1..{n - y}")
    return problems, {"x": x, "y": y, "k": k_eff, "B": Bi, "n": n}


def _quantities(params: BoundParams, B: float, k: int | None, group_by_variant: bool = False):
    kind = params.query_kind
    if kind in (QueryKind.COUNT2, QueryKind.COUNTP, QueryKind.SUM):
        return _count_family_quantities(params, B, k)
    if kind is QueryKind.COUNT_DISTINCT:
        return _count_distinct_quantities(params, B, k)
    if kind is QueryKind.GROUP_BY:
        problems: list[str] = []
        if params.lam is None:
            return ["lam missing for GROUP_BY"], {}
        lam = _as_int(params.lam, "lam", problems)
        n2 = max(params.table_sizes)
        if not problems and n2 % lam != 0:
            problems.append(f"lam = {lam} must divide n2 = {n2}")
        return problems, {"lam": lam, "k": None if problems else n2 // lam}
    if kind in (QueryKind.PKFK_COUNT, QueryKind.PKFK_GROUP_BY):
        return _pkfk_quantities(params, B, k, kind is QueryKind.PKFK_GROUP_BY or group_by_variant)
    if kind is QueryKind.HEAVY_HITTER:
        return _heavy_hitter_quantities(params, B, k)
    if kind is QueryKind.CHAIN4:
        return _chain4_quantities(params, B, k)
    return [f"no generator for kind {kind}"], {}


def snap_params(params: BoundParams, k: int | None = None, search_radius: int | None = None) -> BoundParams:
    """Round the answer floor B to the nearest value with an integral construction.

    Table sizes are never adjusted.  A parameter set that is already integral
    comes back unchanged; otherwise candidate floors are tried outward from
    the requested B (bounded radius, default max(64, B // 8)) and the first
    fully integral candidate that also meets the kind's side conditions wins,
    with the adjustment recorded on ``snap_note``.  Raises :class:`SnapError`
    listing the fractional quantities when nothing in range works.
    """
    problems, _ = _quantities(params, params.B, k)
    if not problems:
        return params
    if search_radius is None:
        search_radius = max(64, int(params.B) // 8)
    base = int(round(params.B))
    for dist in range(search_radius + 1):
        for cand in ({base - dist, base + dist} if dist else {base}):
            if cand < 1 or cand == params.B:
                continue
            cand_problems, _ = _quantities(params, float(cand), k)
            if not cand_problems:
                return dataclasses.replace(
                    params, B=float(cand), snap_note=f"B: {params.B} -> {cand}"
                )
    raise SnapError(
        "no integral parameter tuple within radius "
        f"{search_radius} of B = {params.B}; at the requested B: " + "; ".join(problems)
    )


def _snapped(params: BoundParams, k: int | None, group_by_variant: bool = False) -> dict:
    problems, q = _quantities(params, params.B, k, group_by_variant)
    if problems:
        raise InstanceInfeasible(
            "parameters are not snapped: " + "; ".join(problems)
        )
    return q


# ---------------------------------------------------------------------------
# seeded draws


def _streams(seed: int, s_seed: int | None):
    root = np.random.SeedSequence(seed)
    fam_ss, d1_ss = root.spawn(2)
    if s_seed is not None:
        fam_ss = np.random.SeedSequence(s_seed)
    fam_seed = int(fam_ss.generate_state(1, np.uint64)[0] >> 1)
    return np.random.default_rng(fam_ss), np.random.default_rng(d1_ss), fam_seed


def _draw_design_subset(
    k: int,
    t: int,
    family_size: int,
    kab: KabSet | None,
    fam_rng: np.random.Generator,
    fam_seed: int,
    max_restarts: int,
) -> tuple[KabSet, frozenset[int]]:
    """One member of an intersection-bounded family, embedded into {1..t}.

    The design lives on {1..alpha*k} with alpha = floor(t/k) >= 2; a seeded
    injection spreads it over the full type set so every element of T can
    occur in S even when t is not a multiple of k.
    """
    if k < 1:
        raise InstanceInfeasible("k must be >= 1")
    alpha = t // k
    if alpha < 2:
        raise InstanceInfeasible(f"t = {t} must be at least 2k = {2 * k} to host a design")
    if kab is None:
        kab = kab_construct(k, alpha, family_size, fam_seed, max_restarts)
    elif kab.k != k or kab.universe_size > t:
        raise InstanceInfeasible(
            f"supplied design (k={kab.k}, universe={kab.universe_size}) does not fit k={k}, t={t}"
        )
    member = kab.family[int(fam_rng.integers(len(kab.family)))]
    injection = fam_rng.permutation(t) + 1
    subset = frozenset(int(injection[e - 1]) for e in member)
    return kab, subset


def _draw_branch_value(t: int, subset: frozenset[int], branch: bool | None, d1_rng) -> tuple[int, bool]:
    if branch is None:
        v = int(d1_rng.integers(1, t + 1))
    elif branch:
        inside = sorted(subset)
        v = inside[int(d1_rng.integers(len(inside)))]
    else:
        outside = sorted(set(range(1, t + 1)) - subset)
        if not outside:
            raise InstanceInfeasible("cannot force a miss: S covers the whole type set")
        v = outside[int(d1_rng.integers(len(outside)))]
    return v, v in subset


def _design_column(subset: frozenset[int], block: int, zeros: int) -> np.ndarray:
    parts = [np.full(block, s, dtype=np.int64) for s in sorted(subset)]
    parts.append(np.zeros(zeros, dtype=np.int64))
    return np.concatenate(parts)


def _payload(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def _check_dichotomy(truth_low: float, truth_high: float, epsilon: float):
    if truth_high < (1.0 + epsilon) ** 2 * truth_low - _INT_TOL:
        raise InstanceInfeasible(
            f"chosen overrides break the dichotomy: {truth_high} < (1+eps)^2 * {truth_low}"
        )


# ---------------------------------------------------------------------------
# generators


def gen_count(
    params: BoundParams,
    seed: int,
    *,
    k_override: int | None = None,
    t_override: int | None = None,
    family_size: int = 2,
    kab: KabSet | None = None,
    branch: bool | None = None,
    s_seed: int | None = None,
    max_restarts: int = 1000,
) -> AdversarialInstance:
    """Paired instances for multi-table COUNT and SUM chains.

    Tables 1..p-1 put one shared random type v on their first m_i rows and
    the reserved type 0 on the rest; the last (largest) table carries k equal
    blocks typed by a random design member S, plus a type-0 tail.  The type-0
    cross product realizes the floor:  COUNT is exactly B when v misses S and
    at least (1+eps)^2 * B when it hits.  For SUM the last table's owner
    column is constant sum_max, so SUM = sum_max * COUNT.
    """
    kind = params.query_kind
    if kind not in (QueryKind.COUNT2, QueryKind.COUNTP, QueryKind.SUM):
        raise InstanceInfeasible(f"gen_count does not handle {kind}")
    sizes = params.table_sizes
    if kind is QueryKind.COUNT2 and len(sizes) != 2:
        raise InstanceInfeasible("COUNT2 takes exactly two tables")
    if len(sizes) < 2:
        raise InstanceInfeasible("need at least two tables")
    if sizes[-1] != max(sizes):
        raise InstanceInfeasible("the design-bearing table (last) must be the largest")

    q = _snapped(params, k_override)
    m, tails, M = q["m"], q["tails"], q["M"]
    p = len(sizes)
    ef = params.eps_factor

    problems: list[str] = []
    if k_override is not None:
        k = k_override
    else:
        k = _as_int(min(m[-1], M * math.prod(m) / (ef * params.B)),
                    "k = min(m_p, M * prod(m_i) / ((eps^2+2eps) B))", problems)
    if not problems and (k < 1 or m[-1] % k != 0):
        problems.append(f"k = {k} must divide m_p = {m[-1]}; pass k_override")
    t = t_override if t_override is not None else _as_int(
        k / (8.0 * params.delta), "t = k / (8*delta)", problems)
    if problems:
        raise InstanceInfeasible("; ".join(problems))

    fam_rng, d1_rng, fam_seed = _streams(seed, s_seed)
    kab, subset = _draw_design_subset(k, t, family_size, kab, fam_rng, fam_seed, max_restarts)
    v, hit = _draw_branch_value(t, subset, branch, d1_rng)

    relations = []
    for i in range(p - 1):
        cols = {
            "c": np.concatenate([np.full(m[i], v, dtype=np.int64), np.zeros(tails[i], dtype=np.int64)]),
            "payload": _payload(sizes[i]),
        }
        if kind is QueryKind.SUM and i == 0:
            cols["sumv"] = np.full(sizes[i], M, dtype=np.int64)
        relations.append(Relation(f"r{i+1}", cols))
    block = m[-1] // k
    relations.append(Relation(f"r{p}", {
        "c": _design_column(subset, block, tails[-1]),
        "payload": _payload(sizes[-1]),
    }))

    count_low = math.prod(tails)
    count_high = count_low + math.prod(m[:-1]) * block
    truth_low, truth_high = float(M * count_low), float(M * count_high)
    _check_dichotomy(truth_low, truth_high, params.epsilon)

    aggregate = (Aggregate(AggKind.SUM, (("r1", "sumv"),))
                 if kind is QueryKind.SUM else Aggregate(AggKind.COUNT))
    query = JoinQuery(
        Topology.CHAIN,
        tuple((f"r{i+1}", "c", f"r{i+2}", "c") for i in range(p - 1)),
        aggregate,
    )
    spec = AdversarialSpec(kind, params, k, t, kab, v, seed, extra={
        "m": m, "tails": tails, "block": block, "M": M, "S": sorted(subset),
        "design_table": f"r{p}", "type_range": [1, t],
    })
    return AdversarialInstance(relations, query, truth_low, truth_high, hit, spec)


def gen_count_distinct(
    params: BoundParams,
    seed: int,
    *,
    k_override: int | None = None,
    t_override: int | None = None,
    family_size: int = 2,
    kab: KabSet | None = None,
    branch: bool | None = None,
    s_seed: int | None = None,
    max_restarts: int = 1000,
) -> AdversarialInstance:
    """Paired instances for COUNT(DISTINCT) over a two-table join.

    The distinct-bearing table (last size) splits its join column into k
    design-typed classes of (n-B)/k rows plus B type-0 rows; its payload
    column makes every row distinct.  The companion table holds one row of a
    random type v and one type-0 row (extra rows get inert fresh values).
    The distinct count is B on a miss and B + (n-B)/k on a hit.
    """
    if params.query_kind is not QueryKind.COUNT_DISTINCT:
        raise InstanceInfeasible("gen_count_distinct handles COUNT_DISTINCT only")
    if len(params.table_sizes) != 2:
        raise InstanceInfeasible("generation uses exactly (companion, n) table sizes")
    q = _snapped(params, k_override)
    n, B, k = q["n"], q["B"], q["k"]
    n1 = params.table_sizes[0]
    if n1 < 2:
        raise InstanceInfeasible("the companion table needs at least two rows")
    cls = (n - B) // k

    problems: list[str] = []
    t = t_override if t_override is not None else _as_int(
        k / (8.0 * params.delta), "t = k / (8*delta)", problems)
    if problems:
        raise InstanceInfeasible("; ".join(problems))

    fam_rng, d1_rng, fam_seed = _streams(seed, s_seed)
    kab, subset = _draw_design_subset(k, t, family_size, kab, fam_rng, fam_seed, max_restarts)
    v, hit = _draw_branch_value(t, subset, branch, d1_rng)

    companion_c = np.zeros(n1, dtype=np.int64)
    companion_c[0] = v
    # Rows beyond the (v, 0) pair take fresh inert values above the type set.
    companion_c[2:] = t + 1 + np.arange(max(0, n1 - 2), dtype=np.int64)
    r_prime = Relation("r1", {"c": companion_c, "payload": _payload(n1)})
    r_main = Relation("r2", {"c": _design_column(subset, cls, B), "payload": _payload(n)})

    truth_low, truth_high = float(B), float(B + cls)
    _check_dichotomy(truth_low, truth_high, params.epsilon)
    query = JoinQuery(
        Topology.CHAIN,
        (("r1", "c", "r2", "c"),),
        Aggregate(AggKind.COUNT_DISTINCT, (("r2", "payload"),)),
    )
    spec = AdversarialSpec(params.query_kind, params, k, t, kab, v, seed, extra={
        "class_size": cls, "S": sorted(subset), "design_table": "r2",
        "type_range": [1, t], "fresh_range": [t + 1, t + max(0, n1 - 2)],
    })
    return AdversarialInstance([r_prime, r_main], query, truth_low, truth_high, hit, spec)


def gen_group_by(
    params: BoundParams,
    seed: int,
    *,
    k_override: int | None = None,
    t_override: int | None = None,
    family_size: int = 2,
    kab: KabSet | None = None,
    branch: bool | None = None,
    s_seed: int | None = None,
    max_restarts: int = 1000,
) -> AdversarialInstance:
    """Paired instances for two-table GROUP-BY: no group versus one group.

    The first table joins entirely on one random type v and carries the
    constant group key; the second is partitioned into k = n2/lam design-typed
    classes of size lam.  The grouped result is empty on a miss and a single
    group of size lam * n1 on a hit (truth_low/high encode 0 and that size).
    """
    if params.query_kind is not QueryKind.GROUP_BY:
        raise InstanceInfeasible("gen_group_by handles GROUP_BY only")
    if len(params.table_sizes) != 2:
        raise InstanceInfeasible("generation uses exactly two table sizes")
    n1, n2 = params.table_sizes
    if n2 != max(params.table_sizes):
        raise InstanceInfeasible("the design-bearing table (last) must be the largest")
    q = _snapped(params, None)
    lam, k = q["lam"], q["k"]
    if k_override is not None and k_override != k:
        raise InstanceInfeasible(f"GROUP_BY fixes k = n2/lam = {k}; cannot override to {k_override}")

    problems: list[str] = []
    t = t_override if t_override is not None else _as_int(
        k / (8.0 * params.delta), "t = k / (8*delta)", problems)
    if problems:
        raise InstanceInfeasible("; ".join(problems))

    fam_rng, d1_rng, fam_seed = _streams(seed, s_seed)
    kab, subset = _draw_design_subset(k, t, family_size, kab, fam_rng, fam_seed, max_restarts)
    v, hit = _draw_branch_value(t, subset, branch, d1_rng)

    r1 = Relation("r1", {
        "c": np.full(n1, v, dtype=np.int64),
        "grp": np.ones(n1, dtype=np.int64),
    })
    r2 = Relation("r2", {"c": _design_column(subset, lam, 0), "payload": _payload(n2)})
    query = JoinQuery(
        Topology.CHAIN, (("r1", "c", "r2", "c"),),
        Aggregate(AggKind.GROUP_BY, (("r1", "grp"),)),
    )
    spec = AdversarialSpec(params.query_kind, params, k, t, kab, v, seed, extra={
        "lam": lam, "S": sorted(subset), "design_table": "r2", "type_range": [1, t],
        "group_size": lam * n1,
    })
    return AdversarialInstance([r1, r2], query, 0.0, float(lam * n1), hit, spec)


def gen_pk_fk(
    params: BoundParams,
    group_by: bool,
    seed: int,
    *,
    k_override: int | None = None,
    t_override: int | None = None,
    family_size: int = 2,
    kab: KabSet | None = None,
    branch: bool | None = None,
    s_override=None,
    s_seed: int | None = None,
    max_restarts: int = 1000,
) -> AdversarialInstance:
    """Fact/dimension instances where selection on the dimension hides S.

    COUNT variant: the fact table draws n_F - B foreign keys uniformly from
    {1..n_D-1} and pins B rows to key n_D; dimension rows with keys in
    S ∪ {n_D} are selected.  The selected-join count is exactly
    B + sum of the fact frequencies of the keys in S; no two-value dichotomy
    is asserted (truth_low records the floor B, truth_high the realized
    count, and the per-key fact frequencies land in the spec extras).

    GROUP-BY variant: every fact row carries one random key v from {1..n_D}
    and a constant group key; exactly the dimension rows in S are selected.
    The grouped result is empty unless v lands in S, in which case there is
    one group of size n_F.
    """
    if params.query_kind not in (QueryKind.PKFK_COUNT, QueryKind.PKFK_GROUP_BY):
        raise InstanceInfeasible("gen_pk_fk handles the PKFK kinds only")
    group_by = group_by or params.query_kind is QueryKind.PKFK_GROUP_BY
    if len(params.table_sizes) != 2:
        raise InstanceInfeasible("generation uses exactly (n_D, n_F) table sizes")
    n_dim, n_fact = params.table_sizes
    q = _snapped(params, k_override, group_by_variant=group_by)
    t, B = q["t"], q["B"]
    k = k_override if k_override is not None else q["k"]
    if t_override is not None and t_override != t:
        raise InstanceInfeasible(f"the PKFK type set is the key set; t = {t} cannot be overridden")

    fam_rng, d1_rng, fam_seed = _streams(seed, s_seed)
    if s_override is not None:
        subset = frozenset(int(x) for x in s_override)
        if any(not 1 <= x <= t for x in subset):
            raise InstanceInfeasible(f"s_override must be a subset of 1..{t}")
        kab = None
    else:
        kab, subset = _draw_design_subset(k, t, family_size, kab, fam_rng, fam_seed, max_restarts)

    pk = np.arange(1, n_dim + 1, dtype=np.int64)
    if group_by:
        v, hit = _draw_branch_value(t, subset, branch, d1_rng)
        sel = np.isin(pk, sorted(subset)).astype(np.int64)
        fact = Relation("fact", {
            "fk": np.full(n_fact, v, dtype=np.int64),
            "grp": np.ones(n_fact, dtype=np.int64),
        })
        dim = Relation("dim", {"pk": pk, "sel": sel})
        query = JoinQuery(
            Topology.STAR, (("fact", "fk", "dim", "pk"),),
            Aggregate(AggKind.GROUP_BY, (("fact", "grp"),)),
            selection=(("dim", "sel"),),
        )
        spec = AdversarialSpec(params.query_kind, params, k, t, kab, v, seed, extra={
            "S": sorted(subset), "design_table": "dim", "group_size": n_fact,
        })
        return AdversarialInstance([fact, dim], query, 0.0, float(n_fact), hit, spec)

    if branch is not None:
        raise InstanceInfeasible("the PKFK COUNT construction has no two-point branch to force")
    draws = d1_rng.integers(1, n_dim, size=n_fact - B)
    fk = np.concatenate([draws.astype(np.int64), np.full(B, n_dim, dtype=np.int64)])
    freq = np.bincount(draws, minlength=n_dim)
    sel = (np.isin(pk, sorted(subset)) | (pk == n_dim)).astype(np.int64)
    fact = Relation("fact", {"fk": fk, "payload": _payload(n_fact)})
    dim = Relation("dim", {"pk": pk, "sel": sel})
    truth = B + int(sum(freq[key] for key in subset))
    query = JoinQuery(
        Topology.STAR, (("fact", "fk", "dim", "pk"),),
        Aggregate(AggKind.COUNT),
        selection=(("dim", "sel"),),
    )
    spec = AdversarialSpec(params.query_kind, params, k, t, kab, 0, seed, extra={
        "S": sorted(subset), "design_table": "dim",
        "fact_frequency": {int(key): int(freq[key]) for key in range(1, n_dim)},
    })
    return AdversarialInstance([fact, dim], query, float(B), float(truth), True, spec)


def gen_heavy_hitter(
    params: BoundParams,
    seed: int,
    *,
    k_override: int | None = None,
    t_override: int | None = None,
    family_size: int = 2,
    kab: KabSet | None = None,
    branch: bool | None = None,
    s_seed: int | None = None,
    max_restarts: int = 1000,
) -> AdversarialInstance:
    """Two-table COUNT instances whose top-K join-column frequencies are fixed.

    Both join columns realize the declared heavy-hitter vectors exactly (on
    values disjoint between the tables and from the type set), a bridging
    block pins the join to the floor B, and the second table hides k design
    classes of m2/k rows.  Every per-column frequency vector is invariant
    across the hidden draws, yet COUNT is B on a miss and at least
    (1+eps)^2 * B on a hit.
    """
    if params.query_kind is not QueryKind.HEAVY_HITTER:
        raise InstanceInfeasible("gen_heavy_hitter handles HEAVY_HITTER only")
    q = _snapped(params, k_override)
    m2, B, bridged, part3_r1 = q["m2"], q["B"], q["bridged"], q["part3_r1"]
    k = k_override if k_override is not None else q["k"]
    n1, n2 = params.table_sizes
    hh_a, hh_b = params.hh_a, params.hh_b
    if len(hh_a) != len(hh_b):
        raise InstanceInfeasible("hh_a and hh_b must have the same length K")
    K = len(hh_a)
    aK, bK = hh_a[-1], hh_b[-1]
    block2 = m2 // k

    problems: list[str] = []
    t = t_override if t_override is not None else _as_int(
        k / (8.0 * params.delta), "t = k / (8*delta)", problems)
    if problems:
        raise InstanceInfeasible("; ".join(problems))

    fam_rng, d1_rng, fam_seed = _streams(seed, s_seed)
    kab, subset = _draw_design_subset(k, t, family_size, kab, fam_rng, fam_seed, max_restarts)
    v, hit = _draw_branch_value(t, subset, branch, d1_rng)

    # Value allocation above the type set: left hitters, right hitters, then
    # the bridging values shared by both tables, then inert padding singles.
    hh_left = [t + 1 + i for i in range(K)]
    hh_right = [t + 1 + K + i for i in range(K)]
    n_bridge = (B // (aK * bK)) if bridged else 1
    bridge = [t + 1 + 2 * K + j for j in range(n_bridge)]
    pad_base = t + 1 + 2 * K + n_bridge

    r1_parts = [np.full(a, val, dtype=np.int64) for a, val in zip(hh_a, hh_left)]
    r1_parts.append(np.full(aK, v, dtype=np.int64))
    if bridged:
        r1_parts.extend(np.full(aK, bv, dtype=np.int64) for bv in bridge)
    else:
        r1_parts.append(np.full(aK, bridge[0], dtype=np.int64))
    pad_n = n1 - aK - part3_r1
    r1_parts.append(pad_base + np.arange(pad_n, dtype=np.int64))
    r1_c = np.concatenate(r1_parts)

    r2_parts = [np.full(b, val, dtype=np.int64) for b, val in zip(hh_b, hh_right)]
    r2_parts.append(_design_column(subset, block2, 0))
    if bridged:
        r2_parts.extend(np.full(bK, bv, dtype=np.int64) for bv in bridge)
    else:
        r2_parts.append(np.full(B // aK, bridge[0], dtype=np.int64))
    r2_c = np.concatenate(r2_parts)

    r1 = Relation("r1", {"c": r1_c, "payload": _payload(r1_c.shape[0])})
    r2 = Relation("r2", {"c": r2_c, "payload": _payload(r2_c.shape[0])})
    truth_low, truth_high = float(B), float(B + aK * block2)
    _check_dichotomy(truth_low, truth_high, params.epsilon)
    query = JoinQuery(Topology.CHAIN, (("r1", "c", "r2", "c"),), Aggregate(AggKind.COUNT))
    spec = AdversarialSpec(params.query_kind, params, k, t, kab, v, seed, extra={
        "S": sorted(subset), "design_table": "r2", "block": block2,
        "hh_left_values": hh_left, "hh_right_values": hh_right,
        "bridge_values": bridge, "type_range": [1, t],
        "top_k_a": list(hh_a), "top_k_b": list(hh_b),
    })
    return AdversarialInstance([r1, r2], query, truth_low, truth_high, hit, spec)


def gen_chain4(
    params: BoundParams,
    seed: int,
    *,
    k_override: int | None = None,
    t_override: int | None = None,
    family_size: int = 2,
    kab: KabSet | None = None,
    branch: bool | None = None,
    s_seed: int | None = None,
    max_restarts: int = 1000,
) -> AdversarialInstance:
    """Four-table chain COUNT instances with fully pinned frequency vectors.

    With x = n - sqrt((eps^2+2eps) B) and y = sqrt(B)/x, the outer tables
    devote n-x rows to single marker values, the middle tables enumerate the
    positions 1..n-y, one random position of the second table carries the
    left marker, and the positions in the hidden design subset S carry the
    right marker in the third table.  Every column's frequency vector is the
    same for every draw, yet the chain-join count is x^2 y^2 = B when the
    marked position misses S and (1+eps)^2 B when it hits.
    """
    if params.query_kind is not QueryKind.CHAIN4:
        raise InstanceInfeasible("gen_chain4 handles CHAIN4 only")
    if len(set(params.table_sizes)) != 1:
        raise InstanceInfeasible("all four tables must share one size")
    q = _snapped(params, k_override)
    x, y, B, n = q["x"], q["y"], q["B"], q["n"]
    k = k_override if k_override is not None else q["k"]
    npos = n - y
    t = npos
    if t_override is not None and t_override != t:
        raise InstanceInfeasible(f"the CHAIN4 type set is the position set; t = {t} cannot be overridden")

    fam_rng, d1_rng, fam_seed = _streams(seed, s_seed)
    kab, subset = _draw_design_subset(k, t, family_size, kab, fam_rng, fam_seed, max_restarts)
    pos_a, hit = _draw_branch_value(t, subset, branch, d1_rng)

    val_a, val_b, val_c, val_d = npos + 1, npos + 2, npos + 3, npos + 4
    positions = np.concatenate([np.arange(1, npos + 1, dtype=np.int64),
                                np.zeros(y, dtype=np.int64)])

    c12_r2 = np.concatenate([np.full(npos, val_b, dtype=np.int64), np.zeros(y, dtype=np.int64)])
    c12_r2[pos_a - 1] = val_a
    c34_r3 = np.concatenate([np.full(npos, val_c, dtype=np.int64), np.zeros(y, dtype=np.int64)])
    for s in subset:
        c34_r3[s - 1] = val_d

    r1 = Relation("r1", {
        "c12": np.concatenate([np.full(n - x, val_a, dtype=np.int64), np.zeros(x, dtype=np.int64)]),
        "payload": _payload(n),
    })
    r2 = Relation("r2", {"c12": c12_r2, "c23": positions.copy()})
    r3 = Relation("r3", {"c23": positions.copy(), "c34": c34_r3})
    r4 = Relation("r4", {
        "c34": np.concatenate([np.full(n - x, val_d, dtype=np.int64), np.zeros(x, dtype=np.int64)]),
        "payload": _payload(n),
    })

    truth_low = float(x * x * y * y)
    if truth_low != float(B):
        raise InstanceInfeasible(f"x^2 y^2 = {truth_low} does not realize B = {B}")
    truth_high = float(B + (n - x) ** 2)
    _check_dichotomy(truth_low, truth_high, params.epsilon)
    query = JoinQuery(
        Topology.CHAIN,
        (("r1", "c12", "r2", "c12"), ("r2", "c23", "r3", "c23"), ("r3", "c34", "r4", "c34")),
        Aggregate(AggKind.COUNT),
    )
    spec = AdversarialSpec(params.query_kind, params, k, t, kab, pos_a, seed, extra={
        "x": x, "y": y, "S": sorted(subset), "design_table": "r3",
        "marker_values": {"a": val_a, "b": val_b, "c": val_c, "d": val_d},
    })
    return AdversarialInstance([r1, r2, r3, r4], query, truth_low, truth_high, hit, spec)


GENERATORS = {
    QueryKind.COUNT2: gen_count,
    QueryKind.COUNTP: gen_count,
    QueryKind.SUM: gen_count,
    QueryKind.COUNT_DISTINCT: gen_count_distinct,
    QueryKind.GROUP_BY: gen_group_by,
    QueryKind.HEAVY_HITTER: gen_heavy_hitter,
    QueryKind.CHAIN4: gen_chain4,
}


def generate(params: BoundParams, seed: int, **kwargs) -> AdversarialInstance:
    """Kind-dispatching front door used by the CLI and the harness."""
    kind = params.query_kind
    if kind in (QueryKind.PKFK_COUNT, QueryKind.PKFK_GROUP_BY):
        return gen_pk_fk(params, kind is QueryKind.PKFK_GROUP_BY, seed, **kwargs)
    gen = GENERATORS.get(kind)
    if gen is None:
        raise InstanceInfeasible(f"no generator for kind {kind}")
    return gen(params, seed, **kwargs)
