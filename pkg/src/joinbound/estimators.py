"""Bernoulli sampling over joins: the constructive upper-bound side.

Per-tuple inclusion uses one uniform draw per (seed, table index, row index),
so trials are reproducible, order-independent, and monotone-coupled across
inclusion rates: raising q with the same seed only ever adds tuples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .joinexec import exact_eval
from .reldata import GroupReport, JoinQuery, Relation


@dataclass(frozen=True)
class SamplingPlan:
    """An inclusion probability q sized by a Chebyshev variance target.

    ``target_alpha`` is the requested ratio E[estimate]^2 / Var bound; the
    plan realizes it for any join of p n-row tables whose size is at least B.
    """

    q: float
    p: int
    n: int
    target_alpha: float
    expected_samples: float


@dataclass
class TrialResult:
    """One estimator trial scored by the two-sided ratio test.

    ``rel_error`` is max(estimate/truth, truth/estimate) - 1 when both are
    positive; a zero estimate against a positive truth counts as an infinite
    error and always fails.
    """

    estimate: float
    truth: float
    rel_error: float
    budget_tuples: int
    seed: int
    passed: bool


def plan_samples(p: int, n: int, B: float, target_alpha: float) -> SamplingPlan:
    """Inclusion probability meeting the variance target for join size >= B.

    q = (2 p alpha n^(p-1) / B)^(1/(p-1)), clamped into [1/(p n), 1]; the
    expected sample size is p*n*q.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if B < 1:
        raise ValueError("B must be >= 1")
    raw = (2.0 * p * target_alpha * n ** (p - 1) / B) ** (1.0 / (p - 1))
    q = min(1.0, max(raw, 1.0 / (p * n)))
    return SamplingPlan(q=q, p=p, n=n, target_alpha=target_alpha,
                        expected_samples=p * n * q)


def keep_mask(n_rows: int, q: float, seed: int, table_index: int) -> np.ndarray:
    """Inclusion mask for one table; row i compares its keyed uniform to q."""
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, table_index])
    return rng.random(n_rows) < q


def sample_relations(relations, q: float, seed: int) -> list[Relation]:
    """Independent Bernoulli(q) sample of every relation, keyed by seed."""
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    out = []
    for ti, rel in enumerate(relations):
        mask = keep_mask(rel.row_count, q, seed, ti)
        out.append(rel.take(np.flatnonzero(mask)))
    return out


def ratio_error(estimate: float, truth: float) -> float:
    if truth <= 0:
        return 0.0 if estimate <= 0 else math.inf
    if estimate <= 0:
        return math.inf
    return max(estimate / truth, truth / estimate) - 1.0


def bernoulli_estimate(
    relations,
    query: JoinQuery,
    q: float,
    seed: int,
    *,
    epsilon: float,
    truth: float | None = None,
) -> TrialResult:
    """Sample every relation at rate q, evaluate exactly, scale by q^-p.

    Unbiased for COUNT: each join row survives with probability q^p.  The
    trial passes when the estimate is within a (1+epsilon) factor of the
    truth (supplied, or computed exactly from the full relations).
    """
    relations = list(relations)
    sampled = sample_relations(relations, q, seed)
    kept = sum(rel.row_count for rel in sampled)
    raw = exact_eval(sampled, query)
    estimate = raw * q ** (-len(relations))
    if truth is None:
        truth = float(exact_eval(relations, query))
    err = ratio_error(estimate, truth)
    return TrialResult(
        estimate=float(estimate),
        truth=float(truth),
        rel_error=err,
        budget_tuples=int(kept),
        seed=seed,
        passed=err <= epsilon,
    )


def variance_bound(p: int, n: int, E_size: float, q: float) -> float:
    """Upper bound on the variance of the scaled Bernoulli join-size estimator.

    The un-scaled sample-join count has variance at most
    2 p |E| n^(p-1) q^(p+1); dividing by q^(2p) bounds the estimator.
    Requires q >= 1/(p*n), the floor under which the bound's derivation
    does not apply.
    """
    if q < 1.0 / (p * n):
        raise ValueError(f"variance_bound requires q >= 1/(p*n) = {1.0 / (p * n)}")
    return 2.0 * p * E_size * n ** (p - 1) * q ** (p + 1) / q ** (2 * p)


def sample_group_reporter(relations, query: JoinQuery, q: float, seed: int) -> GroupReport:
    """Report only groups witnessed in the sampled join, sizes scaled by q^-p.

    One-sided by construction: a group absent from the true join can never be
    witnessed in a subsample, so nothing non-existing is ever reported.
    """
    relations = list(relations)
    sampled = sample_relations(relations, q, seed)
    report = exact_eval(sampled, query)
    if not isinstance(report, GroupReport):
        raise ValueError("sample_group_reporter needs a GROUP_BY query")
    return report.scaled(q ** (-len(relations)))


def miss_probability(q: float, rows_per_type: int) -> float:
    """Chance that Bernoulli(q) keeps none of a type's rows: (1-q)^rows.

    The sampler cannot place the hidden type inside the design subset unless
    it keeps at least one matching tuple, so this is the analytic failure
    floor of the distinguishing game at rate q.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if rows_per_type < 1:
        raise ValueError("rows_per_type must be >= 1")
    return (1.0 - q) ** rows_per_type
