"""Persistence: relations as CSV, instances as CSV + JSON sidecar, records as JSON lines.

CSV files are UTF-8 with a header row and decimal integer cells, written with
"\n" newlines so that save/load/save round-trips are byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from .kabset import KabSet
from .mathcore import BoundParams, QueryKind
from .reldata import Aggregate, JoinQuery, Relation
from .relgen import AdversarialInstance, AdversarialSpec

SIDECAR_NAME = "instance.json"


class RecordParseError(ValueError):
    """A persisted record file is malformed; the message names the line."""


def save_relation_csv(path, relation: Relation):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        names = list(relation.columns)
        writer.writerow(names)
        for row in zip(*(relation.columns[c].tolist() for c in names)):
            writer.writerow(row)


def load_relation_csv(path, name: str | None = None) -> Relation:
    path = Path(path)
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecordParseError(f"{path}: empty CSV") from None
        cols: dict[str, list[int]] = {c: [] for c in header}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise RecordParseError(f"{path}: line {lineno} has {len(row)} cells, expected {len(header)}")
            for c, cell in zip(header, row):
                try:
                    cols[c].append(int(cell))
                except ValueError:
                    raise RecordParseError(f"{path}: line {lineno}: non-integer cell {cell!r}") from None
    return Relation(name or path.stem, {c: np.asarray(v, dtype=np.int64) for c, v in cols.items()})


def _params_to_dict(params: BoundParams) -> dict:
    d = dataclasses.asdict(params)
    d["query_kind"] = params.query_kind.value
    d["table_sizes"] = list(params.table_sizes)
    for key in ("hh_a", "hh_b"):
        if d[key] is not None:
            d[key] = list(d[key])
    return d


def params_from_dict(d: dict) -> BoundParams:
    return BoundParams(
        query_kind=QueryKind(d["query_kind"]),
        table_sizes=tuple(d["table_sizes"]),
        epsilon=d["epsilon"],
        delta=d["delta"],
        B=d["B"],
        sum_max=d.get("sum_max"),
        lam=d.get("lam"),
        hh_a=tuple(d["hh_a"]) if d.get("hh_a") else None,
        hh_b=tuple(d["hh_b"]) if d.get("hh_b") else None,
        snap_note=d.get("snap_note"),
    )


def _query_to_dict(query: JoinQuery) -> dict:
    return {
        "topology": query.topology.value,
        "join_columns": [list(jc) for jc in query.join_columns],
        "aggregate": {
            "kind": query.aggregate.kind.value,
            "columns": [list(c) for c in query.aggregate.columns],
        },
        "selection": [list(s) for s in query.selection],
    }


def query_from_dict(d: dict) -> JoinQuery:
    agg = d["aggregate"]
    return JoinQuery(
        topology=d["topology"],
        join_columns=tuple(tuple(jc) for jc in d["join_columns"]),
        aggregate=Aggregate(agg["kind"], tuple(tuple(c) for c in agg.get("columns", ()))),
        selection=tuple(tuple(s) for s in d.get("selection", ())),
    )


def save_instance(directory, instance: AdversarialInstance):
    """Write one CSV per relation plus the JSON sidecar with spec and truths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for rel in instance.relations:
        save_relation_csv(directory / f"{rel.name}.csv", rel)
    spec = instance.spec
    sidecar = {
        "kind": spec.kind.value,
        "params": _params_to_dict(spec.params),
        "k": spec.k,
        "t": spec.t,
        "kab": None if spec.kab is None else {
            "k": spec.kab.k, "alpha": spec.kab.alpha, "seed": spec.kab.seed,
            "restarts": spec.kab.restarts,
            "family": [list(s) for s in spec.kab.family],
        },
        "branch_value": spec.branch_value,
        "seed": spec.seed,
        "extra": _jsonable(spec.extra),
        "truth_low": instance.truth_low,
        "truth_high": instance.truth_high,
        "branch_hit": instance.branch_hit,
        "query": _query_to_dict(instance.query),
        "relations": [rel.name for rel in instance.relations],
    }
    with open(directory / SIDECAR_NAME, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance(directory) -> AdversarialInstance:
    directory = Path(directory)
    with open(directory / SIDECAR_NAME, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    relations = [load_relation_csv(directory / f"{name}.csv", name)
                 for name in sidecar["relations"]]
    kab = None
    if sidecar["kab"] is not None:
        kd = sidecar["kab"]
        kab = KabSet(k=kd["k"], alpha=kd["alpha"], seed=kd["seed"],
                     restarts=kd.get("restarts", 0),
                     family=[tuple(s) for s in kd["family"]])
    spec = AdversarialSpec(
        kind=QueryKind(sidecar["kind"]),
        params=params_from_dict(sidecar["params"]),
        k=sidecar["k"],
        t=sidecar["t"],
        kab=kab,
        branch_value=sidecar["branch_value"],
        seed=sidecar["seed"],
        extra=sidecar.get("extra", {}),
    )
    return AdversarialInstance(
        relations=relations,
        query=query_from_dict(sidecar["query"]),
        truth_low=sidecar["truth_low"],
        truth_high=sidecar["truth_high"],
        branch_hit=sidecar["branch_hit"],
        spec=spec,
    )


def append_records(path, records):
    """Append one JSON object per line; creates the file if needed."""
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(_jsonable(rec), sort_keys=True))
            fh.write("\n")


def load_records(path) -> list[dict]:
    """Parse a JSON-lines record file, naming the offending line on error."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if not line.endswith("\n"):
                raise RecordParseError(f"{path}: line {lineno} is truncated (no newline)")
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise RecordParseError(f"{path}: line {lineno}: {exc.msg}") from None
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    return obj
