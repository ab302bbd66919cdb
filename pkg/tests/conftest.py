"""Shared test helpers: an independent brute-force join oracle and desk cells."""

from __future__ import annotations

import itertools
import math
from collections import Counter

import pytest

from joinbound import BoundParams, QueryKind
from joinbound.reldata import AggKind, GroupReport, group_key

# (eps^2 + 2*eps) = 2, so the hit/miss ratio floor (1+eps)^2 is exactly 3.
EPS_RATIO3 = math.sqrt(3) - 1
# (eps^2 + 2*eps) = 1/4, ratio floor 1.25; the desk chain-join epsilon.
EPS_RATIO54 = math.sqrt(1.25) - 1


def brute_force_eval(relations, query):
    """Nested-loop evaluation, written independently of the library evaluator.

    Enumerates the full cross product of row indices and keeps tuples meeting
    every join equality (and selection); suitable only for desk-size tables.
    """
    by = {r.name: r for r in relations}
    selected = {}
    for name, rel in by.items():
        rows = list(range(rel.row_count))
        selected[name] = rows
    for tname, col in query.selection:
        vals = by[tname].column(col)
        selected[tname] = [i for i in selected[tname] if vals[i] == 1]

    order = query.table_order()
    combos = []
    for combo in itertools.product(*(selected[t] for t in order)):
        pos = dict(zip(order, combo))
        ok = True
        for lt, lc, rt, rc in query.join_columns:
            if by[lt].column(lc)[pos[lt]] != by[rt].column(rc)[pos[rt]]:
                ok = False
                break
        if ok:
            combos.append(pos)

    agg = query.aggregate
    if agg.kind is AggKind.COUNT:
        return len(combos)
    if agg.kind is AggKind.SUM:
        tname, col = agg.columns[0]
        vals = by[tname].column(col)
        return sum(int(vals[pos[tname]]) for pos in combos)
    if agg.kind is AggKind.COUNT_DISTINCT:
        keys = {tuple(int(by[t].column(c)[pos[t]]) for t, c in agg.columns) for pos in combos}
        return len(keys)
    if agg.kind is AggKind.GROUP_BY:
        counter = Counter(
            group_key(tuple(int(by[t].column(c)[pos[t]]) for t, c in agg.columns))
            for pos in combos
        )
        return GroupReport(dict(counter))
    raise AssertionError(f"unhandled aggregate {agg.kind}")


# Desk-scale parameter cells, one per generator kind: (params, generator kwargs).
DESK_CELLS = {
    QueryKind.COUNT2: (
        BoundParams(QueryKind.COUNT2, (90, 90), 1.0, 0.05, 81.0),
        {"k_override": 9, "t_override": 18},
    ),
    QueryKind.COUNTP: (
        BoundParams(QueryKind.COUNTP, (12, 12, 12), 1.0, 0.05, 8.0),
        {"k_override": 2, "t_override": 4},
    ),
    QueryKind.SUM: (
        BoundParams(QueryKind.SUM, (6, 6), EPS_RATIO3, 0.05, 20.0, sum_max=5),
        {"k_override": 2, "t_override": 4},
    ),
    QueryKind.COUNT_DISTINCT: (
        BoundParams(QueryKind.COUNT_DISTINCT, (2, 10), 1.0, 0.05, 1.0),
        {"t_override": 6},
    ),
    QueryKind.GROUP_BY: (
        BoundParams(QueryKind.GROUP_BY, (4, 8), 1.0, 0.05, 1.0, lam=2),
        {"t_override": 8},
    ),
    QueryKind.HEAVY_HITTER: (
        BoundParams(QueryKind.HEAVY_HITTER, (8, 10), 1.0, 0.05, 4.0, hh_a=(4,), hh_b=(4,)),
        {"t_override": 6},
    ),
    QueryKind.CHAIN4: (
        BoundParams(QueryKind.CHAIN4, (6, 6, 6, 6), EPS_RATIO54, 0.05, 16.0),
        {},
    ),
    QueryKind.PKFK_COUNT: (
        BoundParams(QueryKind.PKFK_COUNT, (5, 8), 0.5, 0.05, 2.0),
        {"k_override": 2},
    ),
    QueryKind.PKFK_GROUP_BY: (
        BoundParams(QueryKind.PKFK_GROUP_BY, (4, 8), 0.5, 0.05, 2.0),
        {"k_override": 2},
    ),
}


@pytest.fixture
def desk_cells():
    return DESK_CELLS
