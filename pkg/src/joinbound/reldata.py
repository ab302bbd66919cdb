"""Relations, join queries, and group reports shared by generators and the evaluator."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class SchemaError(ValueError):
    """A query references tables/columns that do not line up with the relations."""


class Topology(str, Enum):
    CHAIN = "chain"
    STAR = "star"


class AggKind(str, Enum):
    COUNT = "count"
    SUM = "sum"
    COUNT_DISTINCT = "count_distinct"
    GROUP_BY = "group_by"


@dataclass
class Relation:
    """A named table of integer columns; value 0 is the reserved join type.

    Columns are stored as int64 arrays of equal length, in insertion order.
    Every relation carries at least two columns.
    """

    name: str
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        if len(self.columns) < 2:
            raise SchemaError(f"relation {self.name!r} needs at least two columns")
        cols = {}
        length = None
        for cname, vals in self.columns.items():
            arr = np.asarray(vals, dtype=np.int64)
            if arr.ndim != 1:
                raise SchemaError(f"column {self.name}.{cname} must be one-dimensional")
            if length is None:
                length = arr.shape[0]
            elif arr.shape[0] != length:
                raise SchemaError(f"column {self.name}.{cname} length differs from siblings")
            cols[cname] = arr
        self.columns = cols

    @property
    def row_count(self) -> int:
        return next(iter(self.columns.values())).shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(f"relation {self.name!r} has no column {name!r}") from None

    def take(self, row_indices: np.ndarray) -> "Relation":
        """A new relation holding the given rows (used by samplers)."""
        return Relation(self.name, {c: v[row_indices] for c, v in self.columns.items()})


@dataclass(frozen=True)
class Aggregate:
    """What to compute over the join result.

    ``columns`` holds (table, column) references: the single SUM column, the
    COUNT_DISTINCT columns, or the GROUP_BY key columns.  COUNT takes none.
    """

    kind: AggKind
    columns: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", AggKind(self.kind))
        object.__setattr__(
            self, "columns", tuple((str(t), str(c)) for t, c in self.columns)
        )
        if self.kind is AggKind.SUM and len(self.columns) != 1:
            raise SchemaError("SUM takes exactly one (table, column)")
        if self.kind in (AggKind.COUNT_DISTINCT, AggKind.GROUP_BY) and not self.columns:
            raise SchemaError(f"{self.kind.value} needs at least one (table, column)")


@dataclass(frozen=True)
class JoinQuery:
    """Join topology plus aggregate plus optional dimension-table selection.

    ``join_columns`` is a list of (left table, left column, right table,
    right column) equality pairs.  For CHAIN the pairs walk a path over the
    tables; for STAR every pair joins the single fact table to one dimension.
    ``selection`` lists (table, indicator column) predicates: only rows with
    indicator value 1 participate.
    """

    topology: Topology
    join_columns: tuple[tuple[str, str, str, str], ...]
    aggregate: Aggregate
    selection: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(
            self,
            "join_columns",
            tuple(tuple(str(x) for x in jc) for jc in self.join_columns),
        )
        object.__setattr__(
            self, "selection", tuple((str(t), str(c)) for t, c in self.selection)
        )
        if not self.join_columns:
            raise SchemaError("a join query needs at least one join pair")

    def table_order(self) -> list[str]:
        """Tables in evaluation order: path order for CHAIN, fact-first for STAR."""
        if self.topology is Topology.CHAIN:
            order = [self.join_columns[0][0]]
            for lt, _, rt, _ in self.join_columns:
                if lt != order[-1]:
                    raise SchemaError("chain join pairs must walk a path over the tables")
                order.append(rt)
            return order
        lefts = {jc[0] for jc in self.join_columns}
        if len(lefts) != 1:
            raise SchemaError("star join pairs must all share one fact table")
        return [next(iter(lefts))] + [jc[2] for jc in self.join_columns]


@dataclass
class GroupReport:
    """Group sizes keyed by the canonical comma-joined decimal group key."""

    groups: dict[str, float] = field(default_factory=dict)

    def total(self) -> float:
        return sum(self.groups.values())

    def scaled(self, factor: float) -> "GroupReport":
        return GroupReport({k: v * factor for k, v in self.groups.items()})


def group_key(values) -> str:
    return ",".join(str(int(v)) for v in values)
