"""Experiment driver: distinguishing games and upper/lower sample-count sweeps.

Seeding is keyed, never shared: the instance and sampling randomness of trial
i depend on (base_seed, cell, trial) but not on the inclusion rate q, so a
q-grid reuses the same trial draws (common random numbers).  Because a kept
tuple at rate q stays kept at any higher rate under the keyed per-tuple
draws, failure curves over the q-grid are monotone trial by trial, not just
in expectation.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import math
import os
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimators import TrialResult, bernoulli_estimate, keep_mask, plan_samples, ratio_error
from .joinexec import exact_eval
from .kabset import ConstructionError
from .mathcore import BoundParams, PreconditionError, QueryKind, lower_bound
from .reldata import GroupReport
from .relgen import AdversarialInstance, InstanceInfeasible, SnapError, generate, snap_params
from .storage import append_records, load_records, params_from_dict

logger = logging.getLogger("joinbound.harness")

OUTPUT_ENV = "JOINBOUND_OUTPUT"
MANIFEST_NAME = "manifest.json"
RECORDS_NAME = "records.jsonl"

GAME = "distinguishing_game"
SWEEP = "upper_lower_sweep"


@dataclass
class ExperimentConfig:
    """One experiment: a cell grid, a trial count, and seeding.

    Cells are dicts of parameter values.  Shared keys: ``sizes`` (explicit
    table sizes) or ``n`` with optional ``p``; ``epsilon``, ``delta``, ``B``;
    optional ``sum_max`` / ``lam`` / ``hh_a`` / ``hh_b``; optional overrides
    ``k``, ``t``, ``family_size``.  Alternatively ``param_grid`` maps each
    key to a list and the cross product becomes the cell list.
    """

    experiment: str
    kind: str
    trials_per_cell: int
    base_seed: int
    cells: list[dict] = field(default_factory=list)
    param_grid: dict = field(default_factory=dict)
    q_grid: list[float] = field(default_factory=list)
    estimator: str = "evidence"
    hit_prior: float | None = None
    target_alpha: float | None = None
    output_path: str | None = None

    def __post_init__(self):
        if self.experiment not in (GAME, SWEEP):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")
        if not self.cells and not self.param_grid:
            raise ValueError("config needs cells or a param_grid")
        if self.experiment == GAME and not self.q_grid:
            raise ValueError("the distinguishing game needs a q_grid")
        if self.estimator not in ("evidence", "bernoulli"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if os.environ.get(OUTPUT_ENV):
            self.output_path = os.environ[OUTPUT_ENV]

    def expanded_cells(self) -> list[dict]:
        if self.cells:
            return [dict(c) for c in self.cells]
        keys = list(self.param_grid)
        out = []
        for combo in itertools.product(*(self.param_grid[k] for k in keys)):
            out.append(dict(zip(keys, combo)))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ExperimentRecord:
    """Aggregated outcome of one (cell, inclusion rate) pair."""

    experiment: str
    kind: str
    cell_index: int
    cell: dict
    q: float
    trials: int
    empirical_failure_rate: float
    mean_rel_error: float
    hit_trials: int
    hit_failure_rate: float | None
    miss_trials: int
    miss_failure_rate: float | None
    truth_low: float
    truth_high: float
    lower_bound_bits: float | None
    budget_bits: float
    mean_kept_tuples: float
    planned_samples: float | None
    ratio_planned_to_bits: float | None
    runtime_ms: int


def child_seed(*parts) -> int:
    """Stable 63-bit seed from a mixed tuple of ints and string tags."""
    ints = [zlib.crc32(p.encode()) if isinstance(p, str) else int(p) & 0xFFFFFFFFFFFFFFFF
            for p in parts]
    return int(np.random.SeedSequence(ints).generate_state(1, np.uint64)[0] >> 1)


def params_from_cell(kind: str, cell: dict) -> BoundParams:
    qk = QueryKind(kind)
    if "sizes" in cell:
        sizes = tuple(int(s) for s in cell["sizes"])
    else:
        n = int(cell["n"])
        default_p = {QueryKind.COUNT2: 2, QueryKind.CHAIN4: 4}.get(qk, 2)
        sizes = (n,) * int(cell.get("p", default_p))
    return BoundParams(
        query_kind=qk,
        table_sizes=sizes,
        epsilon=float(cell["epsilon"]),
        delta=float(cell["delta"]),
        B=float(cell["B"]),
        sum_max=cell.get("sum_max"),
        lam=cell.get("lam"),
        hh_a=tuple(cell["hh_a"]) if cell.get("hh_a") else None,
        hh_b=tuple(cell["hh_b"]) if cell.get("hh_b") else None,
    )


def _gen_kwargs(cell: dict) -> dict:
    kw = {}
    if cell.get("k") is not None:
        kw["k_override"] = int(cell["k"])
    if cell.get("t") is not None:
        kw["t_override"] = int(cell["t"])
    if cell.get("family_size") is not None:
        kw["family_size"] = int(cell["family_size"])
    return kw


def _bits_per_tuple(rows: int, max_value: int) -> int:
    # Documented budget convention: a sampled tuple costs a row id plus the
    # widest join value it may carry.
    return max(1, math.ceil(math.log2(max(2, rows)))) + max(
        1, math.ceil(math.log2(max(2, max_value + 1))))


def evidence_estimate(instance: AdversarialInstance, q: float, seed: int) -> TrialResult:
    """Distinguisher granted everything but the hidden subset S.

    It sees a Bernoulli(q) sample of the design-bearing table plus the
    public side of the construction (the drawn type, both candidate truths)
    and answers truth_high exactly when the sample proves the branch, else
    truth_low.  Its only failure mode is keeping no row that decides the
    branch, which is what the analytic miss probability (1-q)^block prices.
    """
    ev = instance.spec.extra.get("evidence")
    if ev is None:
        raise InstanceInfeasible(
            f"kind {instance.spec.kind} does not define a distinguishing-game evidence rule")
    table = ev["table"]
    ti = next(i for i, rel in enumerate(instance.relations) if rel.name == table)
    rel = instance.relations[ti]
    mask = keep_mask(rel.row_count, q, seed, ti)
    kept = int(mask.sum())
    if ev["style"] == "presence":
        decided_hit = bool(np.any(rel.column(ev["column"])[mask] == ev["value"]))
    else:
        keyed = mask & (rel.column(ev["key_column"]) == ev["key_value"])
        decided_hit = bool(np.any(rel.column(ev["flag_column"])[keyed] == ev["hit_flag"]))
    estimate = instance.truth_high if decided_hit else instance.truth_low
    truth = instance.truth
    err = ratio_error(estimate, truth)
    return TrialResult(
        estimate=float(estimate), truth=float(truth), rel_error=err,
        budget_tuples=kept, seed=seed,
        passed=err <= instance.spec.params.epsilon,
    )


def _attach_evidence(instance: AdversarialInstance):
    """Record the kind's branch-deciding observation for the game."""
    spec = instance.spec
    extra = spec.extra
    kind = spec.kind
    if kind in (QueryKind.COUNT2, QueryKind.COUNTP, QueryKind.SUM,
                QueryKind.COUNT_DISTINCT, QueryKind.GROUP_BY, QueryKind.HEAVY_HITTER):
        extra["evidence"] = {"style": "presence", "table": extra["design_table"],
                             "column": "c", "value": spec.branch_value}
    elif kind is QueryKind.CHAIN4:
        extra["evidence"] = {"style": "decide", "table": "r3",
                             "key_column": "c23", "key_value": spec.branch_value,
                             "flag_column": "c34",
                             "hit_flag": extra["marker_values"]["d"]}
    elif kind is QueryKind.PKFK_GROUP_BY:
        extra["evidence"] = {"style": "decide", "table": "dim",
                             "key_column": "pk", "key_value": spec.branch_value,
                             "flag_column": "sel", "hit_flag": 1}


def _group_truth_matches(report: GroupReport, instance: AdversarialInstance) -> bool:
    if instance.branch_hit:
        return len(report.groups) == 1 and report.total() == instance.truth_high
    return len(report.groups) == 0


def _safe_lower_bound(params: BoundParams) -> float | None:
    try:
        return lower_bound(params).bits
    except PreconditionError:
        return None


def run_distinguishing_game(config: ExperimentConfig) -> list[ExperimentRecord]:
    """Per (cell, q): generate fresh paired instances, run the distinguisher,
    score each trial by the two-sided ratio test against the realized truth.

    The hidden branch follows the construction's own draw (hit probability
    k/t) unless ``hit_prior`` forces a branch with the given probability.
    Infeasible cells are logged and skipped; the run continues.
    """
    if config.experiment != GAME:
        raise ValueError("config is not a distinguishing_game config")
    records: list[ExperimentRecord] = []
    for cell_idx, cell in enumerate(config.expanded_cells()):
        try:
            params = snap_params(params_from_cell(config.kind, cell), cell.get("k"))
            kwargs = _gen_kwargs(cell)
            probe = generate(params, child_seed(config.base_seed, "probe", cell_idx), **kwargs)
        except (SnapError, InstanceInfeasible, ConstructionError, PreconditionError) as exc:
            logger.warning("skipping cell %d (%s): %s", cell_idx, cell, exc)
            continue
        kwargs["kab"] = probe.spec.kab
        bits = _safe_lower_bound(params)
        rel = probe.relation(probe.spec.extra["design_table"])
        bpt = _bits_per_tuple(rel.row_count, int(max(v.max() for v in rel.columns.values())))
        for q in config.q_grid:
            t0 = time.perf_counter()
            fails = hits = hit_fails = 0
            errs = 0.0
            kept_total = 0
            for trial in range(config.trials_per_cell):
                tseed = child_seed(config.base_seed, "trial", cell_idx, trial)
                branch = None
                if config.hit_prior is not None:
                    branch_rng = np.random.default_rng([tseed, zlib.crc32(b"branch")])
                    branch = bool(branch_rng.random() < config.hit_prior)
                inst = generate(params, tseed, branch=branch, **kwargs)
                _attach_evidence(inst)
                if config.estimator == "evidence":
                    trial_res = evidence_estimate(inst, q, tseed)
                else:
                    trial_res = bernoulli_estimate(
                        inst.relations, inst.query, q, tseed,
                        epsilon=params.epsilon, truth=inst.truth)
                errs += trial_res.rel_error if math.isfinite(trial_res.rel_error) else params.epsilon + 1
                kept_total += trial_res.budget_tuples
                if inst.branch_hit:
                    hits += 1
                    hit_fails += not trial_res.passed
                fails += not trial_res.passed
            trials = config.trials_per_cell
            misses = trials - hits
            records.append(ExperimentRecord(
                experiment=GAME, kind=config.kind, cell_index=cell_idx, cell=cell,
                q=q, trials=trials,
                empirical_failure_rate=fails / trials,
                mean_rel_error=errs / trials,
                hit_trials=hits,
                hit_failure_rate=(hit_fails / hits) if hits else None,
                miss_trials=misses,
                miss_failure_rate=((fails - hit_fails) / misses) if misses else None,
                truth_low=probe.truth_low, truth_high=probe.truth_high,
                lower_bound_bits=bits,
                budget_bits=kept_total / trials * bpt,
                mean_kept_tuples=kept_total / trials,
                planned_samples=None, ratio_planned_to_bits=None,
                runtime_ms=int((time.perf_counter() - t0) * 1000),
            ))
    _write_run(config, records)
    return records


def _floor_divisor(n: int, target: float) -> int:
    """Largest divisor of n not exceeding target (at least 1).

    Keeping k at or below its formula value keeps the hit-branch answer at or
    above (1+eps)^2 * B, so the generated cell stays a valid pair.
    """
    best = 1
    for d in range(1, n + 1):
        if n % d == 0 and d <= target:
            best = d
    return best


def run_upper_lower_sweep(config: ExperimentConfig) -> list[ExperimentRecord]:
    """Compare the planned Bernoulli sample count against the bit lower bound.

    Each cell snaps its answer floor, generates one floor-realizing instance
    (branch forced to the miss side, so the exact answer is B), sizes the
    inclusion rate with :func:`plan_samples`, and runs the scaled Bernoulli
    estimator for ``trials_per_cell`` independent sampling seeds.
    """
    if config.experiment != SWEEP:
        raise ValueError("config is not an upper_lower_sweep config")
    if QueryKind(config.kind) not in (QueryKind.COUNT2, QueryKind.COUNTP):
        raise ValueError("the sweep covers the COUNT kinds")
    records: list[ExperimentRecord] = []
    for cell_idx, cell in enumerate(config.expanded_cells()):
        t0 = time.perf_counter()
        try:
            params = snap_params(params_from_cell(config.kind, cell),
                                 search_radius=max(64, int(cell["B"]) // 4))
            derived = lower_bound(params)
            m_last = int(round(derived.derived["m"][-1]))
            k = _floor_divisor(m_last, derived.derived["k"])
            inst = generate(params, child_seed(config.base_seed, "inst", cell_idx),
                            k_override=k, t_override=2 * k, branch=False,
                            family_size=int(cell.get("family_size", 2)))
        except (SnapError, InstanceInfeasible, ConstructionError, PreconditionError) as exc:
            logger.warning("skipping cell %d (%s): %s", cell_idx, cell, exc)
            continue
        p = len(params.table_sizes)
        n = params.table_sizes[0]
        alpha = config.target_alpha
        if alpha is None:
            alpha = 1.0 / (params.delta * params.epsilon ** 2)
        plan = plan_samples(p, n, params.B, alpha)
        truth = inst.truth
        fails = 0
        errs = 0.0
        kept_total = 0
        for trial in range(config.trials_per_cell):
            tseed = child_seed(config.base_seed, "trial", cell_idx, trial)
            res = bernoulli_estimate(inst.relations, inst.query, plan.q, tseed,
                                     epsilon=params.epsilon, truth=truth)
            fails += not res.passed
            errs += res.rel_error if math.isfinite(res.rel_error) else params.epsilon + 1
            kept_total += res.budget_tuples
        bits = derived.bits
        max_val = int(max(v.max() for rel in inst.relations for v in rel.columns.values()))
        bpt = _bits_per_tuple(max(rel.row_count for rel in inst.relations), max_val)
        trials = config.trials_per_cell
        records.append(ExperimentRecord(
            experiment=SWEEP, kind=config.kind, cell_index=cell_idx, cell=cell,
            q=plan.q, trials=trials,
            empirical_failure_rate=fails / trials,
            mean_rel_error=errs / trials,
            hit_trials=0, hit_failure_rate=None,
            miss_trials=trials, miss_failure_rate=fails / trials,
            truth_low=inst.truth_low, truth_high=inst.truth_high,
            lower_bound_bits=bits,
            budget_bits=kept_total / trials * bpt,
            mean_kept_tuples=kept_total / trials,
            planned_samples=plan.expected_samples,
            ratio_planned_to_bits=(plan.expected_samples / bits) if bits else None,
            runtime_ms=int((time.perf_counter() - t0) * 1000),
        ))
    _write_run(config, records)
    return records


def run_experiment(config: ExperimentConfig) -> list[ExperimentRecord]:
    if config.experiment == GAME:
        return run_distinguishing_game(config)
    return run_upper_lower_sweep(config)


def _write_run(config: ExperimentConfig, records: list[ExperimentRecord]):
    if not config.output_path:
        return
    out = Path(config.output_path)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump({"config": config.to_dict(), "created_unix": int(time.time())},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    records_path = out / RECORDS_NAME
    if records_path.exists():
        records_path.unlink()
    append_records(records_path, [dataclasses.asdict(r) for r in records])


def verify_run(directory, sample_fraction: float = 0.01) -> dict:
    """Spot-check a persisted run: regenerate sampled trials, re-evaluate truths.

    For each sampled record the trial-0 instance is regenerated from the
    manifest seeds and evaluated exactly; the exact answer must match the
    branch's recorded truth (group kinds: group count and size must match).
    """
    directory = Path(directory)
    with open(directory / MANIFEST_NAME, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    config = ExperimentConfig.from_dict(
        {**manifest["config"], "output_path": None})
    records = load_records(directory / RECORDS_NAME)
    if not records:
        return {"checked": 0, "mismatches": [], "records": 0}
    step = max(1, int(1.0 / max(sample_fraction, 1e-9)))
    cells = config.expanded_cells()
    mismatches = []
    checked = 0
    for idx in range(0, len(records), step):
        rec = records[idx]
        cell_idx = rec["cell_index"]
        cell = cells[cell_idx]
        try:
            params = snap_params(params_from_cell(config.kind, cell), cell.get("k"))
            kwargs = _gen_kwargs(cell)
            if config.experiment == SWEEP:
                derived = lower_bound(params)
                m_last = int(round(derived.derived["m"][-1]))
                k = _floor_divisor(m_last, derived.derived["k"])
                inst = generate(params, child_seed(config.base_seed, "inst", cell_idx),
                                k_override=k, t_override=2 * k, branch=False)
            else:
                tseed = child_seed(config.base_seed, "trial", cell_idx, 0)
                branch = None
                if config.hit_prior is not None:
                    branch_rng = np.random.default_rng([tseed, zlib.crc32(b"branch")])
                    branch = bool(branch_rng.random() < config.hit_prior)
                inst = generate(params, tseed, branch=branch, **kwargs)
        except (SnapError, InstanceInfeasible, ConstructionError, PreconditionError) as exc:
            mismatches.append({"record": idx, "error": str(exc)})
            continue
        checked += 1
        result = exact_eval(inst.relations, inst.query)
        if isinstance(result, GroupReport):
            ok = _group_truth_matches(result, inst)
        else:
            ok = float(result) == inst.truth
        if not ok:
            mismatches.append({"record": idx, "cell": cell_idx,
                               "evaluated": _describe(result),
                               "expected": inst.truth, "branch_hit": inst.branch_hit})
        if (float(rec["truth_low"]), float(rec["truth_high"])) != (inst.truth_low, inst.truth_high):
            mismatches.append({"record": idx, "cell": cell_idx,
                               "recorded_truths": [rec["truth_low"], rec["truth_high"]],
                               "regenerated_truths": [inst.truth_low, inst.truth_high]})
    return {"checked": checked, "mismatches": mismatches, "records": len(records)}


def _describe(result):
    if isinstance(result, GroupReport):
        return {"groups": result.groups}
    return float(result)
