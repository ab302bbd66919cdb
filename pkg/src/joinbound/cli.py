"""Command-line front door: bounds, kabset, gen, eval, estimate, experiment."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from . import harness, storage
from .estimators import bernoulli_estimate, plan_samples
from .joinexec import exact_eval
from .kabset import ConstructionError, kab_construct, kab_verify
from .mathcore import BoundParams, QueryKind, lower_bound
from .reldata import AggKind, GroupReport
from .relgen import generate, snap_params


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")


def _add_param_args(parser: argparse.ArgumentParser):
    parser.add_argument("--kind", required=True, choices=[k.value for k in QueryKind])
    parser.add_argument("--sizes", required=True, type=_int_list,
                        help="comma-separated table sizes, e.g. 100,100")
    parser.add_argument("--epsilon", required=True, type=float)
    parser.add_argument("--delta", required=True, type=float)
    parser.add_argument("-B", "--answer-floor", required=True, type=float, dest="B")
    parser.add_argument("--sum-max", type=float, default=None)
    parser.add_argument("--lam", type=float, default=None)
    parser.add_argument("--hh-a", type=_int_list, default=None)
    parser.add_argument("--hh-b", type=_int_list, default=None)


def _params_from_args(args) -> BoundParams:
    return BoundParams(
        query_kind=QueryKind(args.kind),
        table_sizes=args.sizes,
        epsilon=args.epsilon,
        delta=args.delta,
        B=args.B,
        sum_max=args.sum_max,
        lam=args.lam,
        hh_a=args.hh_a,
        hh_b=args.hh_b,
    )


def cmd_bounds(args) -> int:
    result = lower_bound(_params_from_args(args))
    _emit({"bits": result.bits, "bits_floor": result.bits_floor, "derived": result.derived})
    return 0


def cmd_kabset(args) -> int:
    try:
        kab = kab_construct(args.k, args.alpha, args.family_size, args.seed,
                            max_restarts=args.max_restarts)
    except ConstructionError as exc:
        _emit({"error": str(exc), "best_family": [list(s) for s in exc.best_family]})
        return 1
    report = kab_verify(kab.family, kab.k, kab.alpha)
    _emit({
        "family": [list(s) for s in kab.family],
        "k": kab.k, "alpha": kab.alpha, "seed": kab.seed, "restarts": kab.restarts,
        "report": dataclasses.asdict(report),
    })
    return 0


def cmd_gen(args) -> int:
    params = _params_from_args(args)
    if args.snap:
        params = snap_params(params, args.k)
    kwargs = {}
    if args.k is not None:
        kwargs["k_override"] = args.k
    if args.t is not None:
        kwargs["t_override"] = args.t
    if args.branch is not None:
        kwargs["branch"] = args.branch == "hit"
    if args.s_seed is not None:
        kwargs["s_seed"] = args.s_seed
    kwargs["family_size"] = args.family_size
    inst = generate(params, args.seed, **kwargs)
    storage.save_instance(args.out, inst)
    _emit({
        "out": args.out,
        "relations": {rel.name: rel.row_count for rel in inst.relations},
        "truth_low": inst.truth_low, "truth_high": inst.truth_high,
        "branch_hit": inst.branch_hit,
        "snap_note": params.snap_note,
    })
    return 0


def _result_payload(result):
    if isinstance(result, GroupReport):
        return {"groups": result.groups, "group_count": len(result.groups)}
    return {"result": result}


def cmd_eval(args) -> int:
    if args.dir:
        inst = storage.load_instance(args.dir)
        relations, query = inst.relations, inst.query
    else:
        with open(args.query, "r", encoding="utf-8") as fh:
            query = storage.query_from_dict(json.load(fh))
        relations = [storage.load_relation_csv(p) for p in args.csv]
    _emit(_result_payload(exact_eval(relations, query, budget=args.budget)))
    return 0


def cmd_estimate(args) -> int:
    inst = storage.load_instance(args.dir)
    if args.q is not None:
        q = args.q
        planned = None
    else:
        p = len(inst.relations)
        n = max(rel.row_count for rel in inst.relations)
        plan = plan_samples(p, n, inst.spec.params.B, args.plan_alpha)
        q = plan.q
        planned = plan.expected_samples
    if inst.query.aggregate.kind is AggKind.GROUP_BY:
        raise SystemExit("estimate covers value-returning aggregates; use the library "
                         "sample_group_reporter for GROUP_BY")
    truth = float(exact_eval(inst.relations, inst.query))
    out = open(args.out, "a", encoding="utf-8") if args.out else sys.stdout
    try:
        for trial in range(args.trials):
            res = bernoulli_estimate(inst.relations, inst.query, q,
                                     harness.child_seed(args.seed, "trial", trial),
                                     epsilon=inst.spec.params.epsilon, truth=truth)
            rec = dataclasses.asdict(res)
            rec["q"] = q
            if planned is not None:
                rec["planned_samples"] = planned
            out.write(json.dumps(rec, sort_keys=True, default=str))
            out.write("\n")
    finally:
        if args.out:
            out.close()
    return 0


def cmd_experiment(args) -> int:
    if args.action == "run":
        config = harness.ExperimentConfig.from_file(args.path)
        records = harness.run_experiment(config)
        _emit({"records": len(records), "output_path": config.output_path})
        return 0
    report = harness.verify_run(args.path, sample_fraction=args.sample_fraction)
    _emit(report)
    return 0 if not report["mismatches"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="joinbound",
        description="Lower bounds, hard-instance generation, exact join evaluation, "
                    "and Bernoulli-sampling experiments for join aggregates.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bounds = sub.add_parser("bounds", help="closed-form lower bound in bits")
    _add_param_args(p_bounds)
    p_bounds.set_defaults(func=cmd_bounds)

    p_kab = sub.add_parser("kabset", help="construct and verify a set design")
    p_kab.add_argument("--k", required=True, type=int)
    p_kab.add_argument("--alpha", required=True, type=int)
    p_kab.add_argument("--family-size", required=True, type=int)
    p_kab.add_argument("--seed", required=True, type=int)
    p_kab.add_argument("--max-restarts", type=int, default=1000)
    p_kab.set_defaults(func=cmd_kabset)

    p_gen = sub.add_parser("gen", help="generate a paired hard instance")
    _add_param_args(p_gen)
    p_gen.add_argument("--seed", required=True, type=int)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--k", type=int, default=None)
    p_gen.add_argument("--t", type=int, default=None)
    p_gen.add_argument("--branch", choices=["hit", "miss"], default=None)
    p_gen.add_argument("--family-size", type=int, default=2)
    p_gen.add_argument("--s-seed", type=int, default=None)
    p_gen.add_argument("--snap", action="store_true",
                       help="snap B to the nearest integral construction first")
    p_gen.set_defaults(func=cmd_gen)

    p_eval = sub.add_parser("eval", help="exact aggregate of a stored instance or CSVs")
    p_eval.add_argument("--dir", default=None, help="instance directory (CSVs + sidecar)")
    p_eval.add_argument("--query", default=None, help="query JSON (with --csv)")
    p_eval.add_argument("--csv", nargs="*", default=[], help="relation CSV files")
    p_eval.add_argument("--budget", type=int, default=10_000_000)
    p_eval.set_defaults(func=cmd_eval)

    p_est = sub.add_parser("estimate", help="Bernoulli-sampling trials on a stored instance")
    p_est.add_argument("--dir", required=True)
    p_est.add_argument("--q", type=float, default=None)
    p_est.add_argument("--plan-alpha", type=float, default=None,
                       help="size q from the variance-target plan instead of --q")
    p_est.add_argument("--trials", type=int, default=100)
    p_est.add_argument("--seed", type=int, default=0)
    p_est.add_argument("--out", default=None, help="append JSON-lines here instead of stdout")
    p_est.set_defaults(func=cmd_estimate)

    p_exp = sub.add_parser("experiment", help="run or verify an experiment")
    p_exp.add_argument("action", choices=["run", "verify"])
    p_exp.add_argument("path", help="config JSON (run) or run directory (verify)")
    p_exp.add_argument("--sample-fraction", type=float, default=0.01)
    p_exp.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval" and not args.dir and not (args.query and args.csv):
        parser.error("eval needs --dir or both --query and --csv")
    if args.command == "estimate" and (args.q is None) == (args.plan_alpha is None):
        parser.error("estimate needs exactly one of --q or --plan-alpha")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
