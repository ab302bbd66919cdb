"""Intersection-bounded set designs built by seeded rejection sampling.

A design with parameters (k, alpha) is a family of distinct k-subsets of
{1, ..., alpha*k} whose pairwise intersections never exceed floor(k/2).
Construction draws whole candidate families uniformly and re-draws until one
verifies, which mirrors the probabilistic existence argument: for admissible
family sizes a uniformly random family is valid with positive probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConstructionError(RuntimeError):
    """Rejection sampling exhausted its restart budget.

    Carries the best (largest valid prefix) family seen so that callers can
    inspect how close the attempt came.
    """

    def __init__(self, message: str, best_family: list[tuple[int, ...]]):
        super().__init__(message)
        self.best_family = best_family


@dataclass
class KabSet:
    """A verified (or to-be-verified) family of k-subsets of {1..alpha*k}.

    Instances returned by :func:`kab_construct` are verified; hand-built
    instances are not checked automatically, call :func:`kab_verify`.
    """

    k: int
    alpha: int
    family: list[tuple[int, ...]]
    seed: int
    restarts: int = 0

    @property
    def universe_size(self) -> int:
        return self.alpha * self.k


@dataclass
class VerifyReport:
    valid: bool
    reason: str = ""
    # First offending pair of family indices, or (index,) for a malformed member.
    witness: tuple | None = None
    intersection_size: int | None = None


def intersection_threshold(k: int) -> int:
    """Maximum allowed pairwise overlap: floor(k/2) (conservative for odd k)."""
    return k // 2


def family_size_from_beta(beta: float, k: int) -> int:
    """Family size floor(2**(beta*k)) corresponding to a design exponent beta."""
    return int(math.floor(2.0 ** (beta * k)))


def kab_verify(family, k: int, alpha: int) -> VerifyReport:
    """Check the three design conditions; report the first violation found.

    Conditions: every member is a k-subset of {1..alpha*k}; members are
    pairwise distinct; every pairwise intersection has size <= floor(k/2).
    Malformed input is reported as invalid rather than raised.
    """
    members = [tuple(sorted(int(e) for e in s)) for s in family]
    universe_hi = alpha * k
    for idx, s in enumerate(members):
        if len(set(s)) != len(s) or len(s) != k:
            return VerifyReport(False, f"member {idx} is not a {k}-subset", (idx,))
        if s[0] < 1 or s[-1] > universe_hi:
            return VerifyReport(False, f"member {idx} leaves the universe 1..{universe_hi}", (idx,))
    seen: dict[tuple, int] = {}
    for idx, s in enumerate(members):
        if s in seen:
            return VerifyReport(False, f"members {seen[s]} and {idx} are identical", (seen[s], idx))
        seen[s] = idx
    cap = intersection_threshold(k)
    sets = [set(s) for s in members]
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            inter = len(sets[i] & sets[j])
            if inter > cap:
                return VerifyReport(
                    False,
                    f"members {i} and {j} intersect in {inter} > {cap} elements",
                    (i, j),
                    inter,
                )
    return VerifyReport(True)


def sample_family(k: int, alpha: int, family_size: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Draw ``family_size`` distinct k-subsets of {1..alpha*k} uniformly."""
    universe = alpha * k
    out: list[tuple[int, ...]] = []
    chosen: set[tuple[int, ...]] = set()
    while len(out) < family_size:
        s = tuple(sorted(rng.choice(universe, size=k, replace=False) + 1))
        if s not in chosen:
            chosen.add(s)
            out.append(tuple(int(e) for e in s))
    return out


def kab_construct(
    k: int,
    alpha: int,
    family_size: int,
    seed: int,
    max_restarts: int = 1000,
) -> KabSet:
    """Build a verified design by whole-family rejection sampling.

    Deterministic given (k, alpha, family_size, seed): restart r uses the
    stream seeded by (seed, r).  Raises :class:`ConstructionError` carrying
    the best family found when ``max_restarts`` fresh families all fail;
    small k genuinely admits no large family, so failure is a real outcome.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if alpha < 2:
        raise ValueError("alpha must be an integer >= 2")
    if family_size < 1:
        raise ValueError("family_size must be positive")
    available = math.comb(alpha * k, k)
    if family_size > available:
        raise ValueError(
            f"family_size {family_size} exceeds the {available} available {k}-subsets"
        )

    best: list[tuple[int, ...]] = []
    for restart in range(max_restarts):
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, restart])
        family = sample_family(k, alpha, family_size, rng)
        report = kab_verify(family, k, alpha)
        if report.valid:
            return KabSet(k=k, alpha=alpha, family=family, seed=seed, restarts=restart)
        # Track the largest prefix that is still a valid family.
        prefix = _largest_valid_prefix(family, k)
        if len(prefix) > len(best):
            best = prefix
    raise ConstructionError(
        f"no valid (k={k}, alpha={alpha}) family of size {family_size} "
        f"found in {max_restarts} restarts; best valid prefix has {len(best)} members",
        best,
    )


def _largest_valid_prefix(family: list[tuple[int, ...]], k: int) -> list[tuple[int, ...]]:
    cap = intersection_threshold(k)
    kept: list[set] = []
    out: list[tuple[int, ...]] = []
    for s in family:
        ss = set(s)
        if all(len(ss & other) <= cap for other in kept):
            kept.append(ss)
            out.append(s)
    return out


def intersection_histogram(kab: KabSet) -> dict[int, int]:
    """Histogram of pairwise intersection sizes over all unordered pairs.

    Returns an empty map for families with fewer than two members; otherwise
    the counts total C(|family|, 2).
    """
    fam = kab.family
    if len(fam) < 2:
        return {}
    universe = kab.alpha * kab.k
    mat = np.zeros((len(fam), universe), dtype=np.int64)
    for i, s in enumerate(fam):
        mat[i, np.asarray(s, dtype=np.int64) - 1] = 1
    gram = mat @ mat.T
    iu = np.triu_indices(len(fam), k=1)
    sizes, counts = np.unique(gram[iu], return_counts=True)
    return {int(s): int(c) for s, c in zip(sizes, counts)}


def hypergeometric_pmf(universe: int, k: int, overlap: int) -> float:
    """Exact P[|S1 ∩ S2| = overlap] for two uniform k-subsets of a universe.

    C(k, l) * C(universe - k, k - l) / C(universe, k); the law governing the
    pairwise overlaps that rejection sampling must beat.
    """
    if overlap < 0 or overlap > k or k - overlap > universe - k:
        return 0.0
    return (
        math.comb(k, overlap) * math.comb(universe - k, k - overlap) / math.comb(universe, k)
    )
