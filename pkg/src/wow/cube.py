"""Sparse multidimensional count cubes and the aggregation kernel.

Cells are accumulated in a hash map keyed by coordinate tuple while a cube
is being built, then frozen into a row-major-sorted coordinate array plus
a count array. Aggregation rolls the stored coordinates through dimension
level maps with vectorized indexing, filters, and groups; every answer at
a coarser level is computed from the stored (finest) coordinates or from a
materialized view, never stored redundantly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from wow.dims import ALL_LEVEL, Dimension
from wow.errors import QueryError

RANGE = "__range__"  # requirement marker: filter needs exact numeric coordinates


@dataclass(frozen=True)
class Axis:
    name: str
    dim: str
    level: str  # level at which coordinates are stored


@dataclass(frozen=True)
class CubeSchema:
    name: str
    axes: tuple[Axis, ...]

    def axis_index(self, name: str) -> int:
        for i, ax in enumerate(self.axes):
            if ax.name == name:
                return i
        raise QueryError(f"unknown dimension {name!r} in cube {self.name!r}")

    def axis_names(self) -> list[str]:
        return [ax.name for ax in self.axes]


class SparseCube:
    """Frozen sparse cube: sorted coordinates, positive integer counts."""

    def __init__(self, schema: CubeSchema, coords: np.ndarray, counts: np.ndarray):
        if coords.ndim != 2 or coords.shape[1] != len(schema.axes):
            raise ValueError("coordinate array shape does not match schema")
        self.schema = schema
        self.coords = coords
        self.counts = counts
        self.scan_count = 0  # cells scanned by aggregate(); observability only

    @classmethod
    def from_cells(cls, schema: CubeSchema, cells: dict[tuple[int, ...], int]) -> "SparseCube":
        k = len(schema.axes)
        items = [(c, n) for c, n in cells.items() if n != 0]
        coords = np.zeros((len(items), k), dtype=np.int32)
        counts = np.zeros(len(items), dtype=np.int64)
        for i, (coord, n) in enumerate(items):
            coords[i] = coord
            counts[i] = n
        if len(items) > 1:
            order = np.lexsort(tuple(coords[:, j] for j in reversed(range(k))))
            coords = coords[order]
            counts = counts[order]
        return cls(schema, coords, counts)

    @property
    def ncells(self) -> int:
        return len(self.counts)

    def total(self) -> int:
        return int(self.counts.sum())

    def cell_dict(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(x) for x in row): int(n) for row, n in zip(self.coords, self.counts)}

    def equal_cells(self, other: "SparseCube") -> bool:
        return (
            self.coords.shape == other.coords.shape
            and bool(np.array_equal(self.coords, other.coords))
            and bool(np.array_equal(self.counts, other.counts))
        )


class CubeBuilder:
    """Mutable cell accumulator; per-document partials merge cell-wise."""

    def __init__(self, schema: CubeSchema):
        self.schema = schema
        self.cells: Counter = Counter()

    def add(self, coord: tuple[int, ...], n: int = 1) -> None:
        self.cells[coord] += n

    def merge(self, other: "CubeBuilder") -> None:
        self.cells.update(other.cells)

    def build(self) -> SparseCube:
        return SparseCube.from_cells(self.schema, self.cells)


# ---------------------------------------------------------------------------
# filters


@dataclass(frozen=True)
class MemberFilter:
    """Cell passes when it rolls into any listed member (clauses are OR'd).

    Each clause pairs a level with member ids at that level, so a dice set
    may mix members from different levels of the same dimension.
    """

    axis: str
    clauses: tuple[tuple[str, tuple[int, ...]], ...]

    @classmethod
    def single(cls, axis: str, level: str, member_id: int) -> "MemberFilter":
        return cls(axis=axis, clauses=((level, (member_id,)),))

    def levels(self) -> list[str]:
        return [level for level, _ in self.clauses]


@dataclass(frozen=True)
class RangeFilter:
    """Inclusive range over the exact integer coordinates of a numeric axis."""

    axis: str
    min_value: int | None = None
    max_value: int | None = None


Filter = MemberFilter | RangeFilter


@dataclass
class ResultRow:
    key: tuple[str, ...]
    count: int
    derived: dict[str, Fraction] = field(default_factory=dict)


@dataclass
class ResultTable:
    columns: tuple[str, ...]  # axis names contributing key components
    rows: list[ResultRow]
    measure: str = "count"


def format_fraction(fr: Fraction) -> str:
    """Fixed 6-decimal rendering (round half to even), exact until here."""
    num, den = fr.numerator, fr.denominator
    if num < 0:
        raise ValueError("derived measures are non-negative")
    q, r = divmod(num * 10**6, den)
    if 2 * r > den or (2 * r == den and q % 2 == 1):
        q += 1
    whole, frac = divmod(q, 10**6)
    return f"{whole}.{frac:06d}"


def result_table_to_obj(table: ResultTable) -> list[dict]:
    out = []
    for row in table.rows:
        obj: dict = {"key": list(row.key), "count": row.count}
        for name, value in row.derived.items():
            obj[name] = format_fraction(value)
        out.append(obj)
    return out


# ---------------------------------------------------------------------------
# aggregation


def _level_map_or_error(dim: Dimension, axis: Axis, level: str) -> np.ndarray:
    if not dim.has_level(level):
        raise QueryError(f"unknown level {level!r} for dimension {axis.name!r}")
    arr = dim.level_map(axis.level, level)
    if arr is None:
        raise QueryError(
            f"level {level!r} is not reachable from {axis.level!r} "
            f"on dimension {axis.name!r}"
        )
    return arr


def filter_mask(
    cube: SparseCube, dims: dict[str, Dimension], filters: tuple[Filter, ...]
) -> np.ndarray | None:
    """Boolean mask of base cells passing every filter (None = all pass)."""
    if not filters:
        return None
    mask = np.ones(cube.ncells, dtype=bool)
    for f in filters:
        i = cube.schema.axis_index(f.axis)
        axis = cube.schema.axes[i]
        dim = dims[axis.dim]
        col = cube.coords[:, i]
        if isinstance(f, MemberFilter):
            passes = np.zeros(cube.ncells, dtype=bool)
            for level, member_ids in f.clauses:
                rolled = _level_map_or_error(dim, axis, level)[col]
                passes |= np.isin(rolled, np.asarray(member_ids, dtype=np.int32))
            mask &= passes
        else:
            if not dim.numeric:
                raise QueryError(f"range filter on non-numeric dimension {f.axis!r}")
            if axis.level != dim.finest_level:
                raise QueryError(
                    f"range filter needs exact coordinates for {f.axis!r}"
                )
            values = dim.numeric_values()[col]
            ok = col != 0  # unknown members never satisfy a range
            if f.min_value is not None:
                ok &= values >= f.min_value
            if f.max_value is not None:
                ok &= values <= f.max_value
            mask &= ok
    return mask


def grouped_ids(
    cube: SparseCube,
    dims: dict[str, Dimension],
    levels: dict[str, str],
    filters: tuple[Filter, ...] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Roll, filter, and group base cells.

    levels gives the target level per axis name; omitted axes roll to ALL.
    Returns (id_rows, sums): id_rows has one column per cube axis in axis
    order (0 for axes at ALL), one row per output group.
    """
    schema = cube.schema
    for name in levels:
        schema.axis_index(name)  # raises on unknown axis

    cube.scan_count += cube.ncells
    mask = filter_mask(cube, dims, filters)
    coords = cube.coords if mask is None else cube.coords[mask]
    counts = cube.counts if mask is None else cube.counts[mask]

    k = len(schema.axes)
    cols = []
    keyed = []
    for i, axis in enumerate(schema.axes):
        level = levels.get(axis.name, ALL_LEVEL)
        if level == ALL_LEVEL:
            continue
        arr = _level_map_or_error(dims[axis.dim], axis, level)
        cols.append(arr[coords[:, i]])
        keyed.append(i)

    if not cols:
        if len(counts) == 0:
            return np.zeros((0, k), dtype=np.int32), np.zeros(0, dtype=np.int64)
        return np.zeros((1, k), dtype=np.int32), np.asarray([counts.sum()], dtype=np.int64)

    stacked = np.stack(cols, axis=1)
    uniq, inverse = np.unique(stacked, axis=0, return_inverse=True)
    inverse = inverse.ravel()  # shape differs across numpy 2.x releases
    sums = np.zeros(len(uniq), dtype=np.int64)
    np.add.at(sums, inverse, counts)

    id_rows = np.zeros((len(uniq), k), dtype=np.int32)
    for j, i in enumerate(keyed):
        id_rows[:, i] = uniq[:, j]
    return id_rows, sums


def sort_rows(rows: list[ResultRow], order: str = "count") -> list[ResultRow]:
    if order == "key":
        return sorted(rows, key=lambda r: r.key)
    return sorted(rows, key=lambda r: (-r.count, r.key))


def aggregate(
    cube: SparseCube,
    dims: dict[str, Dimension],
    group_by: dict[str, str],
    filters: tuple[Filter, ...] = (),
    order: str = "count",
) -> ResultTable:
    """Group-by at the requested levels with slice/dice filters.

    Output rows carry one key component per grouped (non-ALL) axis, in
    cube axis order, sorted by descending count then key (or by key).
    """
    id_rows, sums = grouped_ids(cube, dims, group_by, filters)
    schema = cube.schema
    key_axes = [
        i for i, ax in enumerate(schema.axes)
        if group_by.get(ax.name, ALL_LEVEL) != ALL_LEVEL
    ]
    columns = tuple(schema.axes[i].name for i in key_axes)
    rows = []
    for row_ids, total in zip(id_rows, sums):
        key = tuple(
            dims[schema.axes[i].dim].member_name(group_by[schema.axes[i].name], int(row_ids[i]))
            for i in key_axes
        )
        rows.append(ResultRow(key=key, count=int(total)))
    return ResultTable(columns=columns, rows=sort_rows(rows, order))


# ---------------------------------------------------------------------------
# materialized views


@dataclass
class MaterializedView:
    name: str
    base: str  # base cube name
    levels: dict[str, str]  # axis name -> stored level (ALL included)
    cube: SparseCube


def materialize(
    base: SparseCube,
    dims: dict[str, Dimension],
    levels: dict[str, str],
    name: str,
) -> MaterializedView:
    """Precompute a summary cube at the given group-by levels."""
    full_levels = {
        ax.name: levels.get(ax.name, ALL_LEVEL) for ax in base.schema.axes
    }
    id_rows, sums = grouped_ids(base, dims, full_levels)
    axes = tuple(
        Axis(ax.name, ax.dim, full_levels[ax.name]) for ax in base.schema.axes
    )
    schema = CubeSchema(name=name, axes=axes)
    order = np.lexsort(tuple(id_rows[:, j] for j in reversed(range(id_rows.shape[1]))))
    view_cube = SparseCube(schema, id_rows[order], sums[order])
    return MaterializedView(name=name, base=base.schema.name, levels=full_levels, cube=view_cube)


def view_serves(
    view: MaterializedView,
    dims: dict[str, Dimension],
    requirements: dict[str, set[str]],
) -> bool:
    """True when every required level is reachable from the view's levels.

    The RANGE marker requires exact coordinates, i.e. the view must store
    that axis at the dimension's finest level.
    """
    for ax in view.cube.schema.axes:
        stored = view.levels[ax.name]
        dim = dims[ax.dim]
        for need in requirements.get(ax.name, set()):
            if need == RANGE:
                if stored != dim.finest_level:
                    return False
            elif dim.level_map(stored, need) is None:
                return False
    return True


def route(
    views: list[MaterializedView],
    dims: dict[str, Dimension],
    requirements: dict[str, set[str]],
) -> MaterializedView | None:
    """Pick the smallest view able to serve; None falls back to base."""
    usable = [v for v in views if view_serves(v, dims, requirements)]
    if not usable:
        return None
    return min(usable, key=lambda v: (v.cube.ncells, v.name))


def audit_view(
    view: MaterializedView, base: SparseCube, dims: dict[str, Dimension]
) -> bool:
    """Re-derive the view from its base and compare cell-for-cell."""
    fresh = materialize(base, dims, view.levels, view.name)
    return fresh.cube.equal_cells(view.cube)
