"""Dataset model for mixed numeric/nominal tables and the operations every
detector consumes: CSV ingestion, column statistics, z-normalization,
discretization, and the Gower-style mixed-type distance.

Datasets are immutable by convention: every operation returns a new Dataset
and never mutates shared arrays.  Numeric columns are float64 with NaN for
missing cells; nominal columns are int32 label codes (assigned in first
occurrence order) with -1 for missing.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import DataError, ParseError, SchemaError

DEFAULT_MISSING_SENTINELS = ("", "no data", "sin datos")


class AttributeKind(enum.Enum):
    NUMERIC = "numeric"
    NOMINAL = "nominal"


class BinMethod(enum.Enum):
    EQUAL_WIDTH = "equal_width"
    EQUAL_FREQUENCY = "equal_frequency"


@dataclass(frozen=True)
class Schema:
    """Ordered attribute names with their kinds."""

    attributes: tuple[tuple[str, AttributeKind], ...]

    def __post_init__(self):
        seen = set()
        for name, kind in self.attributes:
            if not name:
                raise SchemaError("attribute names must be nonempty")
            if name in seen:
                raise SchemaError(f"duplicate attribute name: {name!r}")
            if not isinstance(kind, AttributeKind):
                raise SchemaError(f"bad kind for attribute {name!r}: {kind!r}")
            seen.add(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attributes)

    def kind_of(self, name: str) -> AttributeKind:
        for n, kind in self.attributes:
            if n == name:
                return kind
        raise SchemaError(f"unknown attribute: {name!r}")

    def __contains__(self, name: str) -> bool:
        return any(n == name for n, _ in self.attributes)

    def numeric_names(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.attributes if k is AttributeKind.NUMERIC)

    def nominal_names(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.attributes if k is AttributeKind.NOMINAL)


@dataclass(frozen=True)
class ColumnStats:
    attribute: str
    count: int
    missing: int
    mean: float | None
    std_dev: float | None
    min: float | None
    max: float | None
    mode: float | str | None


class Dataset:
    """A schema-tagged table with stable integer row ids.

    Construct via :meth:`from_rows` or :func:`load_csv`.  Cell values are
    plain Python: float for numbers, str for labels, None for missing.
    """

    def __init__(self, schema: Schema, numeric: dict[str, np.ndarray],
                 codes: dict[str, np.ndarray], categories: dict[str, tuple[str, ...]],
                 row_ids: np.ndarray):
        self.schema = schema
        self._numeric = numeric
        self._codes = codes
        self._categories = categories
        self.row_ids = np.asarray(row_ids, dtype=np.int64)
        n = len(self.row_ids)
        if len(np.unique(self.row_ids)) != n:
            raise DataError("row_ids must be unique")
        for name, kind in schema.attributes:
            col = numeric.get(name) if kind is AttributeKind.NUMERIC else codes.get(name)
            if col is None or len(col) != n:
                raise SchemaError(f"column {name!r} missing or wrong length")

    @classmethod
    def from_rows(cls, schema: Schema, rows: Sequence[Sequence[object]],
                  row_ids: Iterable[int] | None = None) -> "Dataset":
        n = len(rows)
        numeric: dict[str, np.ndarray] = {}
        codes: dict[str, np.ndarray] = {}
        categories: dict[str, tuple[str, ...]] = {}
        for idx, (name, kind) in enumerate(schema.attributes):
            if kind is AttributeKind.NUMERIC:
                col = np.full(n, np.nan, dtype=np.float64)
                for i, row in enumerate(rows):
                    v = row[idx]
                    if v is not None:
                        if isinstance(v, str):
                            raise SchemaError(f"label in numeric attribute {name!r}")
                        col[i] = float(v)
                numeric[name] = col
            else:
                cats: list[str] = []
                lookup: dict[str, int] = {}
                col = np.full(n, -1, dtype=np.int32)
                for i, row in enumerate(rows):
                    v = row[idx]
                    if v is None:
                        continue
                    if not isinstance(v, str):
                        raise SchemaError(f"non-label value in nominal attribute {name!r}")
                    code = lookup.get(v)
                    if code is None:
                        code = len(cats)
                        lookup[v] = code
                        cats.append(v)
                    col[i] = code
                codes[name] = col
                categories[name] = tuple(cats)
        if row_ids is None:
            row_ids = np.arange(n, dtype=np.int64)
        return cls(schema, numeric, codes, categories, np.asarray(list(row_ids), dtype=np.int64))

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    def kind_of(self, name: str) -> AttributeKind:
        return self.schema.kind_of(name)

    def numeric_column(self, name: str) -> np.ndarray:
        if self.schema.kind_of(name) is not AttributeKind.NUMERIC:
            raise SchemaError(f"attribute {name!r} is not numeric")
        return self._numeric[name]

    def nominal_codes(self, name: str) -> np.ndarray:
        if self.schema.kind_of(name) is not AttributeKind.NOMINAL:
            raise SchemaError(f"attribute {name!r} is not nominal")
        return self._codes[name]

    def categories(self, name: str) -> tuple[str, ...]:
        if self.schema.kind_of(name) is not AttributeKind.NOMINAL:
            raise SchemaError(f"attribute {name!r} is not nominal")
        return self._categories[name]

    def value(self, row: int, name: str):
        if self.schema.kind_of(name) is AttributeKind.NUMERIC:
            v = self._numeric[name][row]
            return None if math.isnan(v) else float(v)
        code = self._codes[name][row]
        return None if code < 0 else self._categories[name][code]

    def row(self, i: int) -> tuple:
        return tuple(self.value(i, name) for name in self.schema.names)

    def column_values(self, name: str) -> list:
        return [self.value(i, name) for i in range(self.n_rows)]

    def project(self, names: Sequence[str]) -> "Dataset":
        """Column projection; preserves row order and row_ids."""
        for name in names:
            if name not in self.schema:
                raise SchemaError(f"unknown attribute: {name!r}")
        schema = Schema(tuple((n, self.schema.kind_of(n)) for n in names))
        numeric = {n: self._numeric[n] for n in names if n in self._numeric}
        codes = {n: self._codes[n] for n in names if n in self._codes}
        categories = {n: self._categories[n] for n in names if n in self._categories}
        return Dataset(schema, numeric, codes, categories, self.row_ids)

    def take(self, indices) -> "Dataset":
        """Row selection by positional indices (or boolean mask); preserves row_ids."""
        indices = np.asarray(indices)
        if indices.dtype == bool:
            indices = np.nonzero(indices)[0]
        numeric = {n: col[indices] for n, col in self._numeric.items()}
        codes = {n: col[indices] for n, col in self._codes.items()}
        return Dataset(self.schema, numeric, codes, dict(self._categories),
                       self.row_ids[indices])

    def replace_numeric(self, name: str, values: np.ndarray) -> "Dataset":
        if self.schema.kind_of(name) is not AttributeKind.NUMERIC:
            raise SchemaError(f"attribute {name!r} is not numeric")
        numeric = dict(self._numeric)
        numeric[name] = np.asarray(values, dtype=np.float64)
        return Dataset(self.schema, numeric, dict(self._codes), dict(self._categories),
                       self.row_ids)

    def with_numeric(self, name: str, values: Sequence[float | None],
                     replacing: str | None = None) -> "Dataset":
        """Append a numeric column (or swap it in place of ``replacing``)."""
        if len(values) != self.n_rows:
            raise DataError("column length mismatch")
        if replacing is not None and replacing not in self.schema:
            raise SchemaError(f"unknown attribute: {replacing!r}")
        col = np.array([np.nan if v is None else float(v) for v in values],
                       dtype=np.float64)
        attrs = []
        for n, k in self.schema.attributes:
            if n == replacing:
                attrs.append((name, AttributeKind.NUMERIC))
            elif n == name:
                continue
            else:
                attrs.append((n, k))
        if replacing is None:
            attrs.append((name, AttributeKind.NUMERIC))
        numeric = {n: c for n, c in self._numeric.items() if n != replacing and n != name}
        codes = {n: c for n, c in self._codes.items() if n != replacing and n != name}
        categories = {n: c for n, c in self._categories.items() if n != replacing and n != name}
        numeric[name] = col
        return Dataset(Schema(tuple(attrs)), numeric, codes, categories, self.row_ids)

    def with_nominal(self, name: str, labels: Sequence[str | None],
                     replacing: str | None = None) -> "Dataset":
        """Append a nominal column (or swap it in place of ``replacing``)."""
        if len(labels) != self.n_rows:
            raise DataError("column length mismatch")
        if replacing is not None and replacing not in self.schema:
            raise SchemaError(f"unknown attribute: {replacing!r}")
        cats: list[str] = []
        lookup: dict[str, int] = {}
        col = np.full(self.n_rows, -1, dtype=np.int32)
        for i, v in enumerate(labels):
            if v is None:
                continue
            code = lookup.get(v)
            if code is None:
                code = len(cats)
                lookup[v] = code
                cats.append(v)
            col[i] = code
        attrs = []
        for n, k in self.schema.attributes:
            if n == replacing:
                attrs.append((name, AttributeKind.NOMINAL))
            elif n == name:
                continue
            else:
                attrs.append((n, k))
        if replacing is None:
            attrs.append((name, AttributeKind.NOMINAL))
        numeric = {n: c for n, c in self._numeric.items() if n != replacing and n != name}
        codes = {n: c for n, c in self._codes.items() if n != replacing and n != name}
        categories = {n: c for n, c in self._categories.items() if n != replacing and n != name}
        codes[name] = col
        categories[name] = tuple(cats)
        return Dataset(Schema(tuple(attrs)), numeric, codes, categories, self.row_ids)

    def drop(self, names: Sequence[str]) -> "Dataset":
        keep = [n for n in self.schema.names if n not in set(names)]
        return self.project(keep)

    def index_of_row_id(self, row_id: int) -> int:
        hits = np.nonzero(self.row_ids == row_id)[0]
        if len(hits) == 0:
            raise DataError(f"unknown row_id: {row_id}")
        return int(hits[0])


def format_number(v: float) -> str:
    """Shortest exact decimal form; integers drop the trailing .0."""
    if math.isnan(v) or math.isinf(v):
        raise DataError(f"non-finite value cannot be serialized: {v}")
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def _parse_number(cell: str) -> float | None:
    if "_" in cell:
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(source, kind_hints: Mapping[str, AttributeKind] | None = None,
             missing_sentinels: Sequence[str] = DEFAULT_MISSING_SENTINELS) -> Dataset:
    """Load an RFC-4180 CSV (UTF-8, header row required) into a Dataset.

    Columns are typed NUMERIC when every non-missing cell parses as a finite
    real number, unless a kind hint overrides.  Empty cells and sentinel
    strings become missing.  Row ids run 0..n-1 in file order.
    """
    kind_hints = dict(kind_hints or {})
    sentinels = set(missing_sentinels)
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            raw = fh.read()
    elif isinstance(source, bytes):
        raw = source
    else:
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode("utf-8")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}") from exc

    reader = csv.reader(io.StringIO(text))
    try:
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file: header row required", line=1)
        rows: list[list[str]] = []
        for rec in reader:
            if len(rec) != len(header):
                raise ParseError(
                    f"row has {len(rec)} fields, header has {len(header)}",
                    line=reader.line_num)
            rows.append(rec)
    except csv.Error as exc:
        raise ParseError(str(exc), line=reader.line_num) from exc

    seen = set()
    for name in header:
        if not name:
            raise SchemaError("empty column name in header")
        if name in seen:
            raise SchemaError(f"duplicate column name: {name!r}")
        seen.add(name)
    for name in kind_hints:
        if name not in seen:
            raise SchemaError(f"kind hint for unknown column: {name!r}")

    n = len(rows)
    attrs: list[tuple[str, AttributeKind]] = []
    cells: list[list[float | str | None]] = []
    for j, name in enumerate(header):
        column = [None if rec[j] in sentinels else rec[j] for rec in rows]
        hint = kind_hints.get(name)
        if hint is AttributeKind.NOMINAL:
            kind = AttributeKind.NOMINAL
        else:
            parsed = [None if c is None else _parse_number(c) for c in column]
            all_numeric = all(p is not None for c, p in zip(column, parsed) if c is not None)
            if hint is AttributeKind.NUMERIC and not all_numeric:
                bad = next(i for i, (c, p) in enumerate(zip(column, parsed))
                           if c is not None and p is None)
                raise ParseError(
                    f"column {name!r} hinted numeric but cell {column[bad]!r} does not parse",
                    line=bad + 2)
            kind = AttributeKind.NUMERIC if all_numeric else AttributeKind.NOMINAL
        attrs.append((name, kind))
        if kind is AttributeKind.NUMERIC:
            cells.append([None if c is None else _parse_number(c) for c in column])
        else:
            cells.append(column)

    schema = Schema(tuple(attrs))
    row_tuples = [tuple(cells[j][i] for j in range(len(header))) for i in range(n)]
    return Dataset.from_rows(schema, row_tuples)


def write_csv(ds: Dataset, target) -> None:
    """Emit a Dataset as CSV; missing cells become empty fields.

    Numeric values round-trip exactly through load_csv (shortest repr);
    note that labels equal to a configured missing sentinel would reload
    as missing.
    """
    own = isinstance(target, (str, Path))
    fh = open(target, "w", encoding="utf-8", newline="") if own else target
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.schema.names)
        for i in range(ds.n_rows):
            rec = []
            for name in ds.schema.names:
                v = ds.value(i, name)
                if v is None:
                    rec.append("")
                elif isinstance(v, str):
                    rec.append(v)
                else:
                    rec.append(format_number(v))
            writer.writerow(rec)
    finally:
        if own:
            fh.close()


def column_stats(ds: Dataset, attr: str) -> ColumnStats:
    """Descriptive statistics over the non-missing cells of one column.

    Mean/std use the population convention; the mode is the most frequent
    non-missing value with ties broken by first occurrence in row order.
    """
    kind = ds.schema.kind_of(attr)
    values = ds.column_values(attr)
    observed = [v for v in values if v is not None]
    count = len(observed)
    missing = len(values) - count

    best = None  # (count, first_index, value)
    counts: dict = {}
    firsts: dict = {}
    for i, v in enumerate(values):
        if v is None:
            continue
        counts[v] = counts.get(v, 0) + 1
        firsts.setdefault(v, i)
    for v, c in counts.items():
        key = (-c, firsts[v])
        if best is None or key < best[0]:
            best = (key, v)
    mode = None if best is None else best[1]

    mean = std = vmin = vmax = None
    if kind is AttributeKind.NUMERIC and count > 0:
        arr = np.array(observed, dtype=np.float64)
        mean = float(arr.mean())
        std = float(arr.std())
        vmin = float(arr.min())
        vmax = float(arr.max())
    return ColumnStats(attr, count, missing, mean, std, vmin, vmax, mode)


def znormalize(ds: Dataset, attrs: Iterable[str]) -> Dataset:
    """Transform each listed numeric column to (x - mean) / std (population).

    Zero-variance columns become all zero; missing cells stay missing.
    """
    out = ds
    for attr in attrs:
        if ds.schema.kind_of(attr) is not AttributeKind.NUMERIC:
            raise SchemaError(f"znormalize requires numeric attributes, got {attr!r}")
        col = out.numeric_column(attr)
        obs = ~np.isnan(col)
        if not obs.any():
            continue
        mean = col[obs].mean()
        std = col[obs].std()
        if std == 0.0:
            new = np.where(obs, 0.0, np.nan)
        else:
            new = (col - mean) / std
        out = out.replace_numeric(attr, new)
    return out


def _numeric_blocks(ds: Dataset):
    """Stack numeric columns (schema order) and nominal codes (schema order)."""
    num_names = ds.schema.numeric_names()
    nom_names = ds.schema.nominal_names()
    n = ds.n_rows
    num = np.empty((n, len(num_names)), dtype=np.float64)
    inv_range = np.zeros(len(num_names), dtype=np.float64)
    for j, name in enumerate(num_names):
        col = ds.numeric_column(name)
        num[:, j] = col
        obs = col[~np.isnan(col)]
        if len(obs) > 0:
            rng = float(obs.max() - obs.min())
            if rng > 0.0:
                inv_range[j] = 1.0 / rng
    codes = np.empty((n, len(nom_names)), dtype=np.int32)
    for j, name in enumerate(nom_names):
        codes[:, j] = ds.nominal_codes(name)
    return num, inv_range, codes


def mixed_distance(a: int, b: int, ds: Dataset) -> float:
    """Gower-style distance between rows at positions a and b.

    Per-attribute dissimilarity is |x-y| / column range for numeric
    attributes (0 when the range is 0) and 0/1 equality for nominal ones.
    Attributes missing on either side are excluded and the average taken
    over the rest; all-excluded pairs get distance 0.  Accumulation order
    is numeric columns then nominal columns, matching the pairwise kernel
    bit for bit.
    """
    n = ds.n_rows
    if not (0 <= a < n and 0 <= b < n):
        raise DataError("row index out of range")
    num, inv_range, codes = _numeric_blocks(ds)
    total = 0.0
    cnt = 0
    for j in range(num.shape[1]):
        x, y = num[a, j], num[b, j]
        if not (math.isnan(x) or math.isnan(y)):
            total += abs(x - y) * inv_range[j]
            cnt += 1
    for j in range(codes.shape[1]):
        x, y = codes[a, j], codes[b, j]
        if x >= 0 and y >= 0:
            if x != y:
                total += 1.0
            cnt += 1
    return total / cnt if cnt > 0 else 0.0


def pairwise_distances(ds: Dataset) -> np.ndarray:
    """All-pairs mixed_distance matrix (n x n float64)."""
    num, inv_range, codes = _numeric_blocks(ds)
    return kernels.gower_matrix(num, inv_range, codes)


def _equal_width_edges(lo: float, hi: float, n_bins: int) -> list[float]:
    edges = []
    for i in range(1, n_bins):
        e = lo + (hi - lo) * i / n_bins
        if not edges or e > edges[-1]:
            edges.append(e)
    return [e for e in edges if lo < e < hi]


def _equal_frequency_edges(sorted_vals: np.ndarray, n_bins: int) -> list[float]:
    # Cut positions at i*n/bins, pushed right past ties so equal values
    # always land in the same bin; cut value is the midpoint between the
    # two distinct neighbors.
    n = len(sorted_vals)
    edges: list[float] = []
    for i in range(1, n_bins):
        j = math.ceil(i * n / n_bins)
        while j < n and j > 0 and sorted_vals[j] == sorted_vals[j - 1]:
            j += 1
        if 0 < j < n:
            cut = (float(sorted_vals[j - 1]) + float(sorted_vals[j])) / 2.0
            if not edges or cut > edges[-1]:
                edges.append(cut)
    return edges


def discretize(ds: Dataset, attr: str, n_bins: int, method: BinMethod) -> Dataset:
    """Replace a numeric attribute by interval labels.

    Intervals are half-open [lo, hi) except the last, which is closed.
    Missing stays missing.
    """
    if n_bins < 2:
        raise DataError("n_bins must be >= 2")
    col = ds.numeric_column(attr)
    obs_mask = ~np.isnan(col)
    if not obs_mask.any():
        raise DataError(f"cannot discretize all-missing column {attr!r}")
    obs = col[obs_mask]
    lo, hi = float(obs.min()), float(obs.max())
    if method is BinMethod.EQUAL_WIDTH:
        edges = _equal_width_edges(lo, hi, n_bins) if hi > lo else []
    elif method is BinMethod.EQUAL_FREQUENCY:
        edges = _equal_frequency_edges(np.sort(obs), n_bins)
    else:
        raise DataError(f"unknown binning method: {method!r}")

    bounds = [lo] + edges + [hi]
    labels_by_bin = []
    for i in range(len(bounds) - 1):
        left, right = bounds[i], bounds[i + 1]
        closer = "]" if i == len(bounds) - 2 else ")"
        labels_by_bin.append(f"[{format_number(left)},{format_number(right)}{closer}")
    if not edges:
        labels_by_bin = [f"[{format_number(lo)},{format_number(hi)}]"]

    assignment = np.searchsorted(np.array(edges), col, side="right")
    labels: list[str | None] = []
    for i in range(ds.n_rows):
        if obs_mask[i]:
            labels.append(labels_by_bin[int(assignment[i])])
        else:
            labels.append(None)
    return ds.with_nominal(attr, labels, replacing=attr)
