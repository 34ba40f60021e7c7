"""Declarative query evaluation over a built warehouse.

A QuerySpec describes slice/dice filters, group-by levels, the measure and
ordering; evaluation is stateless, so drilldown is just re-issuing a spec
with a finer level. Derived lexical measures are computed in exact
rational arithmetic from an internal grouping that keeps the measure's
detail axis at its finest level; they are rendered to 6 decimal places
only at the serialization boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from wow.builders import COOCCURRENCE, SENTENCE_STYLE, SHORT_PHRASE, WORD_FREQUENCY
from wow.cube import (
    RANGE,
    Filter,
    MemberFilter,
    RangeFilter,
    ResultRow,
    ResultTable,
    SparseCube,
    aggregate,
    grouped_ids,
    result_table_to_obj,
    route,
    sort_rows,
)
from wow.dims import ALL_LEVEL, Dimension
from wow.errors import QueryError
from wow.warehouse import Warehouse

VALID_ORDERS = ("count", "key")

# measure name -> (required cube, detail axis, kind)
DERIVED_MEASURES: dict[str, tuple[str, str, str]] = {
    "ttr": (WORD_FREQUENCY, "word", "distinct"),
    "ndw": (WORD_FREQUENCY, "word", "distinct"),
    "mwf": (WORD_FREQUENCY, "word", "distinct"),
    "avg_sentence_len": (SENTENCE_STYLE, "word_count", "mean"),
    "mean_comma_count": (SENTENCE_STYLE, "comma_count", "mean"),
}


@dataclass(frozen=True)
class MemberRef:
    member: str
    level: str | None = None  # None: resolve by searching levels


@dataclass
class QuerySpec:
    cube: str
    group_by: dict[str, str] = field(default_factory=dict)
    slice: dict[str, MemberRef] = field(default_factory=dict)
    dice: dict[str, list[MemberRef] | tuple[int | None, int | None]] = field(
        default_factory=dict
    )
    measure: str = "count"
    top_k: int | None = None
    order: str = "count"


def _parse_ref(value, field_name: str) -> MemberRef:
    if isinstance(value, str):
        if "::" in value:
            level, member = value.split("::", 1)
            return MemberRef(member=member, level=level)
        return MemberRef(member=value)
    if isinstance(value, dict):
        member = value.get("member")
        if not isinstance(member, str):
            raise QueryError(
                f"{field_name}: member reference needs a 'member' string",
                field=field_name,
            )
        level = value.get("level")
        if level is not None and not isinstance(level, str):
            raise QueryError(f"{field_name}: 'level' must be a string", field=field_name)
        return MemberRef(member=member, level=level)
    raise QueryError(
        f"{field_name}: expected a member string or {{level, member}} object",
        field=field_name,
    )


def spec_from_obj(obj) -> QuerySpec:
    """Validate and convert the documented QuerySpec JSON shape."""
    if not isinstance(obj, dict):
        raise QueryError("query spec must be a JSON object", field="")
    known = {"cube", "group_by", "slice", "dice", "measure", "top_k", "order"}
    for key in obj:
        if key not in known:
            raise QueryError(f"unknown spec field {key!r}", field=key)
    cube = obj.get("cube")
    if not isinstance(cube, str) or not cube:
        raise QueryError("spec needs a 'cube' name", field="cube")

    group_by = {}
    for axis, level in (obj.get("group_by") or {}).items():
        if not isinstance(level, str):
            raise QueryError(f"group_by.{axis}: level must be a string", field=f"group_by.{axis}")
        group_by[axis] = level

    slice_ = {}
    for axis, ref in (obj.get("slice") or {}).items():
        slice_[axis] = _parse_ref(ref, f"slice.{axis}")

    dice = {}
    for axis, val in (obj.get("dice") or {}).items():
        if axis in slice_:
            raise QueryError(
                f"dimension {axis!r} appears in both slice and dice", field=f"dice.{axis}"
            )
        if isinstance(val, list):
            if not val:
                raise QueryError(f"dice.{axis}: empty member list", field=f"dice.{axis}")
            dice[axis] = [_parse_ref(v, f"dice.{axis}") for v in val]
        elif isinstance(val, dict) and ("min" in val or "max" in val):
            extra = set(val) - {"min", "max"}
            if extra:
                raise QueryError(
                    f"dice.{axis}: unknown range field {sorted(extra)[0]!r}",
                    field=f"dice.{axis}",
                )
            lo, hi = val.get("min"), val.get("max")
            for bound in (lo, hi):
                if bound is not None and not isinstance(bound, int):
                    raise QueryError(
                        f"dice.{axis}: range bounds must be integers", field=f"dice.{axis}"
                    )
            if lo is not None and hi is not None and lo > hi:
                raise QueryError(f"dice.{axis}: min > max", field=f"dice.{axis}")
            dice[axis] = (lo, hi)
        else:
            raise QueryError(
                f"dice.{axis}: expected a member list or {{min,max}} range",
                field=f"dice.{axis}",
            )

    measure = obj.get("measure", "count")
    if measure != "count" and measure not in DERIVED_MEASURES:
        raise QueryError(f"unknown measure {measure!r}", field="measure")
    top_k = obj.get("top_k")
    if top_k is not None and (not isinstance(top_k, int) or top_k < 1):
        raise QueryError("top_k must be a positive integer", field="top_k")
    order = obj.get("order", "count")
    if order not in VALID_ORDERS:
        raise QueryError(f"order must be one of {VALID_ORDERS}", field="order")

    return QuerySpec(
        cube=cube, group_by=group_by, slice=slice_, dice=dice,
        measure=measure, top_k=top_k, order=order,
    )


def spec_to_obj(spec: QuerySpec) -> dict:
    def ref_obj(ref: MemberRef):
        return ref.member if ref.level is None else {"level": ref.level, "member": ref.member}

    obj: dict = {"cube": spec.cube}
    if spec.group_by:
        obj["group_by"] = dict(spec.group_by)
    if spec.slice:
        obj["slice"] = {a: ref_obj(r) for a, r in spec.slice.items()}
    if spec.dice:
        obj["dice"] = {
            a: ([ref_obj(r) for r in v] if isinstance(v, list)
                else {k: b for k, b in (("min", v[0]), ("max", v[1])) if b is not None})
            for a, v in spec.dice.items()
        }
    if spec.measure != "count":
        obj["measure"] = spec.measure
    if spec.top_k is not None:
        obj["top_k"] = spec.top_k
    if spec.order != "count":
        obj["order"] = spec.order
    return obj


# ---------------------------------------------------------------------------
# member resolution


def _search_levels(dim: Dimension) -> list[str]:
    out = [dim.finest_level]
    for hname in sorted(dim.hierarchies):
        for lv in dim.hierarchies[hname].levels:
            if lv not in out:
                out.append(lv)
    return out


def resolve_member(dim: Dimension, ref: MemberRef, field_name: str) -> tuple[str, int]:
    """Find (level, member id) for a reference, searching levels if needed."""
    if ref.level is not None:
        if not dim.has_level(ref.level) or ref.level == ALL_LEVEL:
            raise QueryError(
                f"{field_name}: unknown level {ref.level!r} on dimension {dim.name!r}",
                code="unknown_level", field=field_name,
            )
        mid = dim.level_dicts[ref.level].encode(ref.member)
        if mid is None:
            raise QueryError(
                f"{field_name}: no member {ref.member!r} at level {ref.level!r}",
                code="unknown_member", field=field_name,
            )
        return ref.level, mid
    for level in _search_levels(dim):
        mid = dim.level_dicts[level].encode(ref.member)
        if mid is not None:
            return level, mid
    raise QueryError(
        f"{field_name}: no member {ref.member!r} in dimension {dim.name!r}",
        code="unknown_member", field=field_name,
    )


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class Evaluation:
    table: ResultTable
    served_by_view: str | None = None


def _axis_of(cube: SparseCube, name: str):
    return cube.schema.axes[cube.schema.axis_index(name)]


def _build_filters(
    spec: QuerySpec, cube: SparseCube, dims: dict[str, Dimension]
) -> tuple[Filter, ...]:
    filters: list[Filter] = []
    for axis_name, ref in spec.slice.items():
        axis = _axis_of(cube, axis_name)
        level, mid = resolve_member(dims[axis.dim], ref, f"slice.{axis_name}")
        filters.append(MemberFilter.single(axis_name, level, mid))
    for axis_name, val in spec.dice.items():
        axis = _axis_of(cube, axis_name)
        dim = dims[axis.dim]
        if isinstance(val, list):
            by_level: dict[str, list[int]] = {}
            for ref in val:
                level, mid = resolve_member(dim, ref, f"dice.{axis_name}")
                by_level.setdefault(level, []).append(mid)
            clauses = tuple(
                (level, tuple(sorted(ids))) for level, ids in sorted(by_level.items())
            )
            filters.append(MemberFilter(axis=axis_name, clauses=clauses))
        else:
            if not dim.numeric:
                raise QueryError(
                    f"dice.{axis_name}: range dice needs a numeric dimension",
                    field=f"dice.{axis_name}",
                )
            filters.append(RangeFilter(axis=axis_name, min_value=val[0], max_value=val[1]))
    return tuple(filters)


def _requirements(
    spec: QuerySpec, cube: SparseCube, filters: tuple[Filter, ...], detail_axis: str | None
) -> dict[str, set[str]]:
    req: dict[str, set[str]] = {}

    def need(axis: str, level: str) -> None:
        req.setdefault(axis, set()).add(level)

    for axis_name, level in spec.group_by.items():
        cube.schema.axis_index(axis_name)
        if level != ALL_LEVEL:
            need(axis_name, level)
    for f in filters:
        if isinstance(f, MemberFilter):
            for level in f.levels():
                need(f.axis, level)
        else:
            need(f.axis, RANGE)
    if detail_axis is not None:
        axis = _axis_of(cube, detail_axis)
        need(detail_axis, "word" if axis.dim == "word" else "value")
    return req


def _validate_group_by(spec: QuerySpec, cube: SparseCube, dims: dict[str, Dimension]) -> None:
    for axis_name, level in spec.group_by.items():
        axis = _axis_of(cube, axis_name)
        dim = dims[axis.dim]
        if not dim.has_level(level):
            raise QueryError(
                f"unknown level {level!r} for dimension {axis_name!r}",
                code="unknown_level", field=f"group_by.{axis_name}",
            )


def evaluate_routed(spec: QuerySpec, wh: Warehouse, use_views: bool = True) -> Evaluation:
    """Evaluate a spec, answering from a materialized view when possible."""
    base = wh.cubes.get(spec.cube)
    if base is None:
        raise QueryError(f"unknown cube {spec.cube!r}", code="unknown_cube", field="cube")
    dims = wh.dims

    detail_axis = None
    measure_kind = None
    if spec.measure != "count":
        required_cube, detail_axis, measure_kind = DERIVED_MEASURES[spec.measure]
        if spec.cube != required_cube:
            raise QueryError(
                f"measure {spec.measure!r} requires cube {required_cube!r}",
                field="measure",
            )

    _validate_group_by(spec, base, dims)
    filters = _build_filters(spec, base, dims)

    target: SparseCube = base
    served = None
    if use_views:
        req = _requirements(spec, base, filters, detail_axis)
        view = route(wh.views_of(spec.cube), dims, req)
        if view is not None:
            target = view.cube
            served = view.name

    if spec.measure == "count":
        table = aggregate(target, dims, spec.group_by, filters, spec.order)
    elif measure_kind == "distinct":
        table = _distinct_measure(target, dims, spec, filters)
    else:
        table = _mean_measure(target, dims, spec, filters, detail_axis)

    if spec.top_k is not None:
        table.rows = table.rows[: spec.top_k]
    table.measure = spec.measure
    return Evaluation(table=table, served_by_view=served)


def evaluate(spec: QuerySpec, wh: Warehouse, use_views: bool = True) -> ResultTable:
    return evaluate_routed(spec, wh, use_views).table


def _final_key_setup(cube: SparseCube, spec: QuerySpec, detail_axis: str):
    """Key axes and per-row key extraction for derived-measure grouping."""
    schema = cube.schema
    key_axes = [
        i for i, ax in enumerate(schema.axes)
        if spec.group_by.get(ax.name, ALL_LEVEL) != ALL_LEVEL
    ]
    columns = tuple(schema.axes[i].name for i in key_axes)
    return key_axes, columns


def _internal_levels(cube: SparseCube, spec: QuerySpec, detail_axis: str, finest: str):
    levels = dict(spec.group_by)
    levels[detail_axis] = finest
    return levels


def _roll_detail(dims, cube, spec, detail_axis, finest):
    """Map from detail-level ids to the user's requested level (or None)."""
    user_level = spec.group_by.get(detail_axis, ALL_LEVEL)
    if user_level == ALL_LEVEL:
        return None
    axis = _axis_of(cube, detail_axis)
    arr = dims[axis.dim].level_map(finest, user_level)
    if arr is None:
        raise QueryError(
            f"level {user_level!r} is not reachable from {finest!r} on {detail_axis!r}",
            field=f"group_by.{detail_axis}",
        )
    return arr


def _distinct_measure(
    cube: SparseCube, dims: dict[str, Dimension], spec: QuerySpec, filters
) -> ResultTable:
    """TTR / NDW / MWF: distinct finest-level words vs summed tokens."""
    detail_axis = "word"
    finest = "word"
    id_rows, sums = grouped_ids(
        cube, dims, _internal_levels(cube, spec, detail_axis, finest), filters
    )
    schema = cube.schema
    didx = schema.axis_index(detail_axis)
    detail_map = _roll_detail(dims, cube, spec, detail_axis, finest)
    key_axes, columns = _final_key_setup(cube, spec, detail_axis)

    groups: dict[tuple[int, ...], list[int]] = {}
    for row, n in zip(id_rows, sums):
        key_ids = []
        for i in key_axes:
            if i == didx and detail_map is not None:
                key_ids.append(int(detail_map[row[i]]))
            else:
                key_ids.append(int(row[i]))
        stats = groups.setdefault(tuple(key_ids), [0, 0])
        stats[0] += 1  # distinct words
        stats[1] += int(n)  # tokens

    rows = []
    for key_ids, (ndw, tokens) in groups.items():
        key = tuple(
            dims[schema.axes[i].dim].member_name(spec.group_by[schema.axes[i].name], kid)
            for i, kid in zip(key_axes, key_ids)
        )
        value = {
            "ttr": Fraction(ndw, tokens),
            "ndw": Fraction(ndw),
            "mwf": Fraction(tokens, ndw),
        }[spec.measure]
        rows.append(ResultRow(key=key, count=tokens, derived={spec.measure: value}))
    return ResultTable(columns=columns, rows=sort_rows(rows, spec.order), measure=spec.measure)


def _mean_measure(
    cube: SparseCube, dims: dict[str, Dimension], spec: QuerySpec, filters, detail_axis: str
) -> ResultTable:
    """Weighted mean of a numeric axis's exact coordinate over each group."""
    finest = "value"
    id_rows, sums = grouped_ids(
        cube, dims, _internal_levels(cube, spec, detail_axis, finest), filters
    )
    schema = cube.schema
    didx = schema.axis_index(detail_axis)
    dim = dims[schema.axes[didx].dim]
    values = dim.numeric_values()
    detail_map = _roll_detail(dims, cube, spec, detail_axis, finest)
    key_axes, columns = _final_key_setup(cube, spec, detail_axis)

    groups: dict[tuple[int, ...], list[int]] = {}
    for row, n in zip(id_rows, sums):
        vid = int(row[didx])
        if vid == 0:
            raise QueryError(
                f"cannot average over unknown {detail_axis!r} values", field="measure"
            )
        key_ids = []
        for i in key_axes:
            if i == didx and detail_map is not None:
                key_ids.append(int(detail_map[row[i]]))
            else:
                key_ids.append(int(row[i]))
        stats = groups.setdefault(tuple(key_ids), [0, 0])
        stats[0] += int(values[vid]) * int(n)  # weighted sum
        stats[1] += int(n)  # observations

    rows = []
    for key_ids, (weighted, total) in groups.items():
        key = tuple(
            dims[schema.axes[i].dim].member_name(spec.group_by[schema.axes[i].name], kid)
            for i, kid in zip(key_axes, key_ids)
        )
        rows.append(
            ResultRow(
                key=key, count=total, derived={spec.measure: Fraction(weighted, total)}
            )
        )
    return ResultTable(columns=columns, rows=sort_rows(rows, spec.order), measure=spec.measure)


# ---------------------------------------------------------------------------
# stock queries


def avg_sentence_length(wh: Warehouse, level: str = "century") -> ResultTable:
    return evaluate(
        QuerySpec(cube=SENTENCE_STYLE, group_by={"book": level}, measure="avg_sentence_len"),
        wh,
    )


def comma_profile(
    wh: Warehouse, min_words: int, author: str | None = None
) -> ResultTable:
    """Mean comma count over long sentences, per author."""
    spec = QuerySpec(
        cube=SENTENCE_STYLE,
        group_by={"book": "author"},
        dice={"word_count": (min_words, None)},
        measure="mean_comma_count",
    )
    if author is not None:
        spec.slice = {"book": MemberRef(member=author, level="author")}
    return evaluate(spec, wh)


def top_phrases(wh: Warehouse, author: str, k: int = 20) -> ResultTable:
    """Most frequent 4-word phrases for one author."""
    spec = QuerySpec(
        cube=SHORT_PHRASE,
        group_by={f"w{i}": "word" for i in range(1, 5)},
        slice={"book": MemberRef(member=author, level="author")},
        top_k=k,
    )
    return evaluate(spec, wh)


# ---------------------------------------------------------------------------
# analogy profiles


@dataclass
class AnalogyProfile:
    pair: tuple[str, str]
    vector: dict[str, int]


def _pair_vectors(wh: Warehouse) -> dict[tuple[str, str], dict[str, int]]:
    table = evaluate(
        QuerySpec(
            cube=COOCCURRENCE,
            group_by={"word_a": "stem", "join": "word", "word_b": "stem"},
        ),
        wh,
    )
    vectors: dict[tuple[str, str], dict[str, int]] = {}
    for row in table.rows:
        a, join, b = row.key
        vectors.setdefault((a, b), {})[join] = row.count
    return vectors


def analogy_profile(wh: Warehouse, stem_a: str, stem_b: str) -> AnalogyProfile:
    """Joining-word count vector for a stem pair, summed over all books."""
    word_dim = wh.dims["word"]
    stems = word_dim.level_dicts["stem"]
    vector: dict[str, int] = {}
    if stem_a in stems and stem_b in stems:
        table = evaluate(
            QuerySpec(
                cube=COOCCURRENCE,
                group_by={"join": "word"},
                slice={
                    "word_a": MemberRef(member=stem_a, level="stem"),
                    "word_b": MemberRef(member=stem_b, level="stem"),
                },
            ),
            wh,
        )
        vector = {row.key[0]: row.count for row in table.rows}
    return AnalogyProfile(pair=(stem_a, stem_b), vector=vector)


def similarity(p: AnalogyProfile, q: AnalogyProfile) -> float:
    """Cosine similarity over the joining-word space; empty profiles -> 0."""
    if not p.vector or not q.vector:
        return 0.0
    dot = sum(n * q.vector.get(j, 0) for j, n in p.vector.items())
    norm_p = math.sqrt(sum(n * n for n in p.vector.values()))
    norm_q = math.sqrt(sum(n * n for n in q.vector.values()))
    return min(1.0, dot / (norm_p * norm_q))


def rank_analogies(
    wh: Warehouse, stem_a: str, stem_b: str, top_k: int | None = None
) -> list[tuple[str, str, float]]:
    """Observed stem pairs ranked by joining-profile similarity to (a, b)."""
    vectors = _pair_vectors(wh)
    target_vec = vectors.get((stem_a, stem_b), {})
    target = AnalogyProfile(pair=(stem_a, stem_b), vector=target_vec)
    ranked = []
    for (c, d), vec in vectors.items():
        if (c, d) == (stem_a, stem_b):
            continue
        sim = similarity(target, AnalogyProfile(pair=(c, d), vector=vec))
        ranked.append((c, d, sim))
    ranked.sort(key=lambda t: (-t[2], t[0], t[1]))
    if top_k is not None:
        ranked = ranked[:top_k]
    return ranked


# ---------------------------------------------------------------------------
# serialization shared by the CLI and the HTTP service


def result_table_json_bytes(table: ResultTable) -> bytes:
    """Canonical ResultTable JSON; CLI and service emit these exact bytes."""
    return json.dumps(result_table_to_obj(table), separators=(",", ":")).encode("utf-8")
