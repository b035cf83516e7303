"""Tabular data loading, encoding, binning and splitting."""

from __future__ import annotations

import csv
import gzip
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

NUMERIC = "numeric"
CATEGORICAL = "categorical"
MISSING = "?"

DEFAULT_MIN_GROUP_SIZE = 50
DEFAULT_QUANTILE_BINS = 5


class SchemaError(ValueError):
    pass


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str


@dataclass(frozen=True)
class Schema:
    name: str
    columns: tuple[ColumnSpec, ...]
    target: str
    positive: frozenset[str]
    negative: frozenset[str]

    @property
    def header(self) -> list[str]:
        names = [c.name for c in self.columns]
        return names + [self.target]

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Schema":
        columns = []
        target = None
        for entry in raw.get("columns", []):
            if entry.get("target"):
                if target is not None:
                    raise SchemaError("schema declares more than one target column")
                target = entry
                continue
            kind = entry.get("kind")
            if kind not in (NUMERIC, CATEGORICAL):
                raise SchemaError(f"column {entry.get('name')!r}: unknown kind {kind!r}")
            columns.append(ColumnSpec(str(entry["name"]), kind))
        if target is None:
            raise SchemaError("schema has no target column")
        names = [c.name for c in columns] + [target["name"]]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        positive = frozenset(str(v) for v in target.get("positive", ["1"]))
        negative = frozenset(str(v) for v in target.get("negative", ["0"]))
        if positive & negative:
            raise SchemaError("target encodings overlap")
        return cls(str(raw.get("name", "table")), tuple(columns), str(target["name"]), positive, negative)

    @classmethod
    def load(cls, path: str | Path) -> "Schema":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"schema file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, Mapping):
            raise SchemaError(f"{path}: schema must be a mapping")
        return cls.from_dict(raw)


@dataclass(frozen=True, eq=False)
class DataTable:
    """Column-major table of features plus a binary target.

    Numeric columns are float64 arrays, categorical columns object arrays of
    str. Arrays are made read-only on construction.
    """

    columns: tuple[ColumnSpec, ...]
    values: Mapping[str, np.ndarray]
    target: np.ndarray

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        n = len(self.target)
        if not np.isin(self.target, (0, 1)).all():
            raise ParseError("target values must be 0 or 1")
        frozen = {}
        for c in self.columns:
            arr = np.asarray(self.values[c.name], dtype=float if c.kind == NUMERIC else object)
            if arr.shape != (n,):
                raise SchemaError(f"column {c.name!r} has {arr.shape[0]} entries, expected {n}")
            arr = arr.copy()
            arr.flags.writeable = False
            frozen[c.name] = arr
        tgt = np.asarray(self.target, dtype=np.int8).copy()
        tgt.flags.writeable = False
        object.__setattr__(self, "values", frozen)
        object.__setattr__(self, "target", tgt)

    @property
    def n_rows(self) -> int:
        return len(self.target)

    def __len__(self) -> int:
        return self.n_rows

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def kind(self, name: str) -> str:
        for c in self.columns:
            if c.name == name:
                return c.kind
        raise KeyError(f"no column named {name!r}")

    def __getitem__(self, name: str) -> np.ndarray:
        if name not in self.values:
            raise KeyError(f"no column named {name!r}")
        return self.values[name]

    def take(self, index) -> "DataTable":
        index = np.asarray(index)
        return DataTable(
            self.columns,
            {c.name: self.values[c.name][index] for c in self.columns},
            self.target[index],
        )

    def with_target(self, target) -> "DataTable":
        return DataTable(self.columns, self.values, np.asarray(target))

    def positive_rate(self) -> float:
        return float(self.target.mean()) if self.n_rows else float("nan")


def reference_schema() -> Schema:
    with resources.files("fairdream.data").joinpath("adult_schema.yaml").open(encoding="utf-8") as fh:
        return Schema.from_dict(yaml.safe_load(fh))


def reference_data_path() -> Path:
    return Path(str(resources.files("fairdream.data").joinpath("adult.csv.gz")))


def load_reference() -> DataTable:
    """The bundled 48,842-row Adult Census table."""
    return load_table(reference_data_path(), reference_schema())


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def load_table(path: str | Path, schema: Schema | str | Path) -> DataTable:
    """Read a comma-separated file with header into a DataTable.

    Missing values (``?`` or empty) become their own category in categorical
    columns and are replaced by the column median in numeric ones.
    """
    if not isinstance(schema, Schema):
        schema = Schema.load(schema)
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    with _open_text(path) as fh:
        reader = csv.reader(fh, skipinitialspace=True)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: file has no header") from None
        if set(header) != set(schema.header) or len(header) != len(schema.header):
            missing = sorted(set(schema.header) - set(header))
            extra = sorted(set(header) - set(schema.header))
            raise SchemaError(f"{path}: header does not match schema (missing={missing}, unexpected={extra})")
        pos = {name: i for i, name in enumerate(header)}
        raw: dict[str, list[str]] = {name: [] for name in header}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            for name, i in pos.items():
                raw[name].append(row[i].strip())

    target = np.empty(len(raw[schema.target]), dtype=np.int8)
    for i, v in enumerate(raw[schema.target]):
        if v in schema.positive:
            target[i] = 1
        elif v in schema.negative:
            target[i] = 0
        else:
            raise ParseError(f"{path}: row {i + 2}: target value {v!r} is not a declared label")

    values = {}
    for col in schema.columns:
        cells = raw[col.name]
        if col.kind == CATEGORICAL:
            values[col.name] = np.array([c if c else MISSING for c in cells], dtype=object)
            continue
        arr = np.empty(len(cells))
        for i, c in enumerate(cells):
            if c in ("", MISSING):
                arr[i] = np.nan
                continue
            try:
                arr[i] = float(c)
            except ValueError:
                raise ParseError(f"{path}: row {i + 2}: column {col.name!r} value {c!r} is not numeric") from None
        gaps = np.isnan(arr)
        if gaps.any() and not gaps.all():
            arr[gaps] = np.median(arr[~gaps])
        values[col.name] = arr
    return DataTable(schema.columns, values, target)


def subsample(table: DataTable, n_rows: int, seed: int) -> DataTable:
    """Stratified subsample of exactly ``n_rows`` rows (order preserved)."""
    if n_rows >= table.n_rows:
        return table
    _, keep = split(table, n_rows / table.n_rows, seed)
    return keep


def split(table: DataTable, test_fraction: float = 0.3, seed: int = 0) -> tuple[DataTable, DataTable]:
    """Stratified train/test split.

    The test part holds exactly ``round(test_fraction * n)`` rows; per-class
    quotas are allotted by largest remainder so class proportions match as
    closely as integers allow.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = table.n_rows
    if n == 0:
        raise ValueError("cannot split an empty table")
    rng = np.random.default_rng(seed)
    total = int(round(test_fraction * n))
    classes = [np.flatnonzero(table.target == c) for c in (0, 1)]
    exact = np.array([test_fraction * len(idx) for idx in classes])
    quota = np.floor(exact).astype(int)
    # ties in the remainder go to the larger class first, then class 0
    order = sorted(range(2), key=lambda c: (-(exact[c] - quota[c]), -len(classes[c]), c))
    for c in order[: total - quota.sum()]:
        quota[c] += 1
    test_idx = []
    for idx, q in zip(classes, quota):
        test_idx.append(rng.permutation(idx)[:q])
    test_mask = np.zeros(n, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True
    return table.take(np.flatnonzero(~test_mask)), table.take(np.flatnonzero(test_mask))


# ---------------------------------------------------------------------------
# Group partitions


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def label(self) -> str:
        return f"[{_fmt(self.lo)}, {_fmt(self.hi)})"

    def to_dict(self) -> dict:
        return {"type": "interval", "lo": _json_float(self.lo), "hi": _json_float(self.hi)}


@dataclass(frozen=True)
class CategorySet:
    categories: frozenset[str]

    def label(self) -> str:
        cats = sorted(self.categories)
        if len(cats) > 3:
            return "{" + ", ".join(cats[:3]) + f", +{len(cats) - 3}}}"
        return "{" + ", ".join(cats) + "}"

    def to_dict(self) -> dict:
        return {"type": "categories", "values": sorted(self.categories)}


def _fmt(x: float) -> str:
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:g}"


def _json_float(x: float):
    return None if not np.isfinite(x) else float(x)


@dataclass(frozen=True, eq=False)
class GroupPartition:
    """Rows of one table assigned to disjoint groups of a sensitive feature.

    ``edges`` is set for numeric partitions: group ``j`` covers
    ``[edges[j], edges[j + 1])``, and the outermost groups are open-ended when
    the partition is applied to other tables.
    """

    feature: str
    groups: tuple
    assignment: np.ndarray
    edges: tuple[float, ...] | None = None

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64).copy()
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_groups)

    def labels(self) -> list[str]:
        return [g.label() for g in self.groups]

    def masks(self) -> list[np.ndarray]:
        return [self.assignment == k for k in range(self.n_groups)]

    def assign(self, table: DataTable) -> np.ndarray:
        """Group index of every row of ``table`` (-1 for unseen categories)."""
        col = table[self.feature]
        if self.edges is not None:
            inner = np.asarray(self.edges[1:-1], dtype=float)
            return np.searchsorted(inner, col.astype(float), side="right").astype(np.int64)
        lookup = {cat: k for k, g in enumerate(self.groups) for cat in g.categories}
        return np.array([lookup.get(v, -1) for v in col], dtype=np.int64)

    def apply(self, table: DataTable) -> "GroupPartition":
        """The same group descriptors applied to another table's rows."""
        a = self.assign(table)
        if (a < 0).any():
            raise ValueError(f"feature {self.feature!r}: rows with categories outside the partition")
        return GroupPartition(self.feature, self.groups, a, self.edges)


def _interval_partition(feature, values, edges) -> GroupPartition:
    edges = tuple(float(e) for e in edges)
    groups = tuple(Interval(edges[k], edges[k + 1]) for k in range(len(edges) - 1))
    assignment = np.searchsorted(np.asarray(edges[1:-1]), values, side="right")
    return GroupPartition(feature, groups, assignment, edges)


def _merge_small_intervals(values, edges, min_size):
    edges = list(edges)
    while len(edges) > 2:
        counts = np.bincount(np.searchsorted(np.asarray(edges[1:-1]), values, side="right"), minlength=len(edges) - 1)
        small = np.flatnonzero(counts < min_size)
        if not len(small):
            break
        k = int(small[np.argmin(counts[small])])
        if k == 0:
            neighbor = 1
        elif k == len(counts) - 1:
            neighbor = k - 1
        else:
            neighbor = k - 1 if counts[k - 1] <= counts[k + 1] else k + 1
        # drop the edge shared by k and its neighbor
        del edges[max(k, neighbor)]
    return edges


def quantile_edges(values: np.ndarray, k: int) -> list[float]:
    """Bin edges giving ``k`` groups of near-equal size; tied values stay together."""
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if k < 1:
        raise ValueError("quantile bin count must be >= 1")
    if k > len(np.unique(v)):
        raise ValueError(f"cannot form {k} quantile bins from {len(np.unique(v))} distinct values")
    cuts = [v[int(round(j * n / k))] for j in range(1, k)]
    inner = sorted(set(float(c) for c in cuts if c > v[0]))
    return [float(v[0])] + inner + [float(np.nextafter(v[-1], np.inf))]


def bin_feature(
    table: DataTable,
    feature: str,
    strategy: str = "auto",
    *,
    k: int = DEFAULT_QUANTILE_BINS,
    edges: Sequence[float] | None = None,
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE,
) -> GroupPartition:
    """Partition the rows of ``table`` by one feature.

    Strategies: ``"quantile"`` (``k`` near-equal bins), ``"edges"`` (explicit
    interval edges, respected verbatim), ``"categories"`` (one group per
    category). ``"auto"`` picks quantile for numeric features and categories
    otherwise. Quantile and category groups smaller than ``min_group_size``
    are merged into a neighbor.
    """
    kind = table.kind(feature)
    if strategy == "auto":
        strategy = "edges" if edges is not None else ("quantile" if kind == NUMERIC else "categories")
    values = table[feature]

    if strategy in ("quantile", "edges") and kind != NUMERIC:
        raise ValueError(f"feature {feature!r} is categorical; use the categories strategy")
    if strategy == "categories" and kind != CATEGORICAL:
        raise ValueError(f"feature {feature!r} is numeric; use quantile or explicit edges")

    if strategy == "edges":
        if edges is None or len(edges) < 2:
            raise ValueError("explicit binning needs at least two edges")
        e = [float(x) for x in edges]
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError("explicit edges must be strictly increasing")
        if len(values) and (values.min() < e[0] or values.max() >= e[-1]):
            raise ValueError(
                f"edges [{e[0]:g}, {e[-1]:g}) do not cover the observed range "
                f"[{values.min():g}, {values.max():g}] of {feature!r}"
            )
        return _interval_partition(feature, values, e)

    if strategy == "quantile":
        e = quantile_edges(values, k)
        e = _merge_small_intervals(values, e, min_group_size)
        return _interval_partition(feature, values, e)

    if strategy == "categories":
        cats, counts = np.unique(values.astype(str), return_counts=True)
        big = [c for c, n in zip(cats, counts) if n >= min_group_size]
        small = [c for c, n in zip(cats, counts) if n < min_group_size]
        sets = [{c} for c in big]
        if small:
            pooled = int(sum(n for c, n in zip(cats, counts) if c in set(small)))
            if pooled >= min_group_size or not sets:
                sets.append(set(small))
            else:
                sizes = [int(sum(counts[cats == c][0] for c in s)) for s in sets]
                sets[int(np.argmin(sizes))].update(small)
        groups = tuple(CategorySet(frozenset(s)) for s in sets)
        lookup = {c: i for i, s in enumerate(sets) for c in s}
        assignment = np.array([lookup[v] for v in values.astype(str)], dtype=np.int64)
        return GroupPartition(feature, groups, assignment)

    raise ValueError(f"unknown binning strategy {strategy!r}")


# ---------------------------------------------------------------------------
# Encoding


@dataclass(frozen=True, eq=False)
class Encoder:
    """Column encoding fitted on a training table.

    ``tree`` mode keeps numeric columns and maps categories to sorted integer
    codes (-1 for categories never seen at fit time). ``linear`` mode
    standardizes numeric columns and one-hot expands categories; unseen
    categories give an all-zero block.
    """

    mode: str
    columns: tuple[ColumnSpec, ...]
    categories: Mapping[str, tuple[str, ...]]
    means: Mapping[str, float] = field(default_factory=dict)
    scales: Mapping[str, float] = field(default_factory=dict)

    UNKNOWN = -1

    @classmethod
    def fit(cls, table: DataTable, mode: str) -> "Encoder":
        if mode not in ("tree", "linear"):
            raise ValueError(f"unknown encoding mode {mode!r}")
        cats = {}
        means, scales = {}, {}
        for c in table.columns:
            col = table[c.name]
            if c.kind == CATEGORICAL:
                cats[c.name] = tuple(sorted(set(col.astype(str))))
            elif mode == "linear":
                mu = float(col.mean()) if len(col) else 0.0
                sd = float(col.std()) if len(col) else 1.0
                means[c.name] = mu
                scales[c.name] = sd if sd > 0 else 1.0
        return cls(mode, table.columns, cats, means, scales)

    @property
    def feature_names(self) -> list[str]:
        names = []
        for c in self.columns:
            if c.kind == CATEGORICAL and self.mode == "linear":
                names.extend(f"{c.name}={v}" for v in self.categories[c.name])
            else:
                names.append(c.name)
        return names

    def transform(self, table: DataTable) -> "EncodedMatrix":
        if [c.name for c in table.columns] != [c.name for c in self.columns]:
            raise SchemaError("table columns do not match the encoder's columns")
        blocks = []
        n = table.n_rows
        for c in self.columns:
            col = table[c.name]
            if c.kind == NUMERIC:
                if self.mode == "linear":
                    blocks.append(((col - self.means[c.name]) / self.scales[c.name])[:, None])
                else:
                    blocks.append(col.astype(float)[:, None])
                continue
            index = {v: i for i, v in enumerate(self.categories[c.name])}
            codes = np.array([index.get(v, self.UNKNOWN) for v in col.astype(str)], dtype=np.int64)
            if self.mode == "tree":
                blocks.append(codes.astype(float)[:, None])
            else:
                onehot = np.zeros((n, len(index)))
                known = codes >= 0
                onehot[np.flatnonzero(known), codes[known]] = 1.0
                blocks.append(onehot)
        X = np.hstack(blocks) if blocks else np.zeros((n, 0))
        X = np.ascontiguousarray(X, dtype=float)
        X.flags.writeable = False
        return EncodedMatrix(X, self.mode, tuple(self.feature_names), table.target)


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    X: np.ndarray
    mode: str
    feature_names: tuple[str, ...]
    y: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape


def encode(table: DataTable, mode: str, encoder: Encoder | None = None) -> EncodedMatrix:
    """Encode ``table``; fits a fresh encoder on it unless one is supplied."""
    if encoder is None:
        encoder = Encoder.fit(table, mode)
    elif encoder.mode != mode:
        raise ValueError(f"encoder was fitted in {encoder.mode!r} mode, not {mode!r}")
    return encoder.transform(table)
