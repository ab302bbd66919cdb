"""Exact evaluation of aggregates over chain and star joins.

``exact_eval`` is the ground-truth oracle: it materializes the join row set
(budget-gated) and aggregates it.  ``chain_count_by_frequency`` is the fast
path for chain COUNT, walking per-table value-pair frequency maps instead of
rows; the two cross-validate each other.  Counts and sums are accumulated as
Python integers, so adversarially large products cannot overflow silently.
"""

from __future__ import annotations

from collections import Counter, defaultdict

import numpy as np

from .reldata import AggKind, GroupReport, JoinQuery, Relation, SchemaError, Topology, group_key


class BudgetExceeded(RuntimeError):
    """Materializing the join would exceed the intermediate-row budget."""


DEFAULT_ROW_BUDGET = 10_000_000


def _relations_by_name(relations) -> dict[str, Relation]:
    byname: dict[str, Relation] = {}
    for rel in relations:
        if rel.name in byname:
            raise SchemaError(f"duplicate relation name {rel.name!r}")
        byname[rel.name] = rel
    return byname


def _apply_selection(byname: dict[str, Relation], query: JoinQuery) -> dict[str, Relation]:
    out = dict(byname)
    for tname, col in query.selection:
        if tname not in out:
            raise SchemaError(f"selection references unknown table {tname!r}")
        rel = out[tname]
        out[tname] = rel.take(np.flatnonzero(rel.column(col) == 1))
    return out


def _materialize(
    byname: dict[str, Relation], query: JoinQuery, budget: int
) -> dict[str, np.ndarray]:
    """Row indices per table, aligned across tables, one entry per join row."""
    order = query.table_order()
    for t in order:
        if t not in byname:
            raise SchemaError(f"query references unknown table {t!r}")
    first = order[0]
    rowsets: dict[str, np.ndarray] = {first: np.arange(byname[first].row_count)}
    for lt, lc, rt, rc in query.join_columns:
        if lt not in rowsets:
            raise SchemaError(f"join pair uses table {lt!r} before it is reachable")
        left_keys = byname[lt].column(lc)[rowsets[lt]]
        right_vals = byname[rt].column(rc)
        sorter = np.argsort(right_vals, kind="stable")
        sorted_vals = right_vals[sorter]
        lo = np.searchsorted(sorted_vals, left_keys, side="left")
        hi = np.searchsorted(sorted_vals, left_keys, side="right")
        counts = hi - lo
        total = int(counts.sum())
        if total > budget:
            raise BudgetExceeded(
                f"joining {rt!r} would materialize {total} rows (budget {budget})"
            )
        rep = np.repeat(np.arange(left_keys.shape[0]), counts)
        for t in list(rowsets):
            rowsets[t] = rowsets[t][rep]
        if total:
            ends = np.cumsum(counts)
            offsets = np.arange(total) - np.repeat(ends - counts, counts)
            rowsets[rt] = sorter[np.repeat(lo, counts) + offsets]
        else:
            rowsets[rt] = np.empty(0, dtype=np.int64)
    return rowsets


def _exact_sum(arr: np.ndarray) -> int:
    if arr.size == 0:
        return 0
    # Stay exact even when int64 accumulation could wrap.
    peak = int(np.abs(arr).max()) * arr.size
    if peak < 2**62:
        return int(arr.sum(dtype=np.int64))
    return int(sum(int(v) for v in arr))


def exact_eval(relations, query: JoinQuery, budget: int = DEFAULT_ROW_BUDGET):
    """Exact aggregate of the full join result.

    Returns an integer for COUNT / SUM / COUNT_DISTINCT and a
    :class:`GroupReport` (every group with its exact size) for GROUP_BY.
    Raises :class:`SchemaError` on table/column mismatches and
    :class:`BudgetExceeded` when materialization would exceed ``budget``
    intermediate rows.
    """
    byname = _apply_selection(_relations_by_name(relations), query)
    rowsets = _materialize(byname, query, budget)
    agg = query.aggregate
    n_rows = next(iter(rowsets.values())).shape[0]

    if agg.kind is AggKind.COUNT:
        return n_rows
    if agg.kind is AggKind.SUM:
        tname, col = agg.columns[0]
        if tname not in rowsets:
            raise SchemaError(f"SUM column references unjoined table {tname!r}")
        return _exact_sum(byname[tname].column(col)[rowsets[tname]])
    stacked = _gather_columns(byname, rowsets, agg.columns)
    if agg.kind is AggKind.COUNT_DISTINCT:
        if n_rows == 0:
            return 0
        return int(np.unique(stacked, axis=0).shape[0])
    if agg.kind is AggKind.GROUP_BY:
        report = GroupReport()
        if n_rows == 0:
            return report
        keys, counts = np.unique(stacked, axis=0, return_counts=True)
        for key_row, cnt in zip(keys, counts):
            report.groups[group_key(key_row)] = int(cnt)
        return report
    raise SchemaError(f"unsupported aggregate {agg.kind!r}")


def _gather_columns(byname, rowsets, columns) -> np.ndarray:
    cols = []
    for tname, col in columns:
        if tname not in rowsets:
            raise SchemaError(f"aggregate column references unjoined table {tname!r}")
        cols.append(byname[tname].column(col)[rowsets[tname]])
    return np.stack(cols, axis=1) if cols else np.empty((0, 0), dtype=np.int64)


def chain_count_by_frequency(relations, join_columns) -> int:
    """Chain-join COUNT from per-table value-pair frequencies.

    Equals ``exact_eval`` COUNT on the same chain while touching each row
    once: the running vector maps "value exposed to the next table" to the
    number of partial join rows ending in it.
    """
    byname = _relations_by_name(relations)
    pairs = [tuple(jc) for jc in join_columns]
    if not pairs:
        raise SchemaError("need at least one join pair")
    first, first_col = pairs[0][0], pairs[0][1]
    freq: Counter = Counter(int(v) for v in byname[first].column(first_col))
    for idx, (lt, lc, rt, rc) in enumerate(pairs):
        if idx + 1 < len(pairs):
            nlt, nlc = pairs[idx + 1][0], pairs[idx + 1][1]
            if nlt != rt:
                raise SchemaError("join pairs must walk a chain for the frequency path")
            transfer: dict[int, Counter] = defaultdict(Counter)
            in_vals = byname[rt].column(rc)
            out_vals = byname[rt].column(nlc)
            for vin, vout in zip(in_vals.tolist(), out_vals.tolist()):
                transfer[vin][vout] += 1
            nxt: Counter = Counter()
            for v, weight in freq.items():
                for w, cnt in transfer.get(v, {}).items():
                    nxt[w] += weight * cnt
            freq = nxt
        else:
            terminal = Counter(int(v) for v in byname[rt].column(rc))
            return sum(weight * terminal.get(v, 0) for v, weight in freq.items())
    raise AssertionError("unreachable")


def top_k_frequencies(relation: Relation, column: str, K: int) -> tuple[int, ...]:
    """The K largest value frequencies on a column, non-increasing.

    Ties are broken toward smaller values; when fewer than K distinct values
    exist, all frequencies are returned (a shorter vector).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    counts = Counter(int(v) for v in relation.column(column))
    ranked = sorted(counts.items(), key=lambda vc: (-vc[1], vc[0]))
    return tuple(cnt for _, cnt in ranked[:K])
