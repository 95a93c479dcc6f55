"""Seeded synthetic tables with ground-truth anomaly injection, plus the
detection-quality metrics that close the loop.

The affidavit-shaped preset mirrors the attribute mix of a real export
(identifier and monetary numerics, mostly low-entropy nominal descriptors)
so the default detector settings have a realistic substrate to work on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SchemaError
from .tabular import AttributeKind, Dataset, Schema

POINT_OUTLIER = "point_outlier"
LABEL_NOISE = "label_noise"
MISSING_BURST = "missing_burst"
INJECTION_KINDS = (POINT_OUTLIER, LABEL_NOISE, MISSING_BURST)

DEFAULT_MAGNITUDE = 8.0


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int
    numeric_attrs: tuple[tuple[str, float, float], ...]         # (name, mean, std)
    nominal_attrs: tuple[tuple[str, tuple[tuple[str, float], ...]], ...]
    target_attr: tuple[str, tuple[tuple[str, float], ...]] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_rows < 1:
            raise DataError("n_rows must be >= 1")
        names = [n for n, _, _ in self.numeric_attrs] + [n for n, _ in self.nominal_attrs]
        if self.target_attr is not None:
            names.append(self.target_attr[0])
        if len(set(names)) != len(names):
            raise SchemaError("duplicate attribute names in spec")
        for name, _, std in self.numeric_attrs:
            if std < 0:
                raise DataError(f"negative std for {name!r}")
        dists = [d for _, d in self.nominal_attrs]
        if self.target_attr is not None:
            dists.append(self.target_attr[1])
        for dist in dists:
            total = sum(p for _, p in dist)
            if abs(total - 1.0) > 1e-9 or any(p < 0 for _, p in dist):
                raise DataError(f"label distribution must sum to 1, got {total}")


@dataclass(frozen=True)
class InjectionSpec:
    rate: float
    kinds: tuple[str, ...]
    target_attrs: tuple[str, ...]
    magnitude: float = DEFAULT_MAGNITUDE
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.rate < 0.5:
            raise DataError(f"rate must be in (0, 0.5), got {self.rate}")
        if not self.kinds:
            raise DataError("at least one injection kind required")
        unknown = [k for k in self.kinds if k not in INJECTION_KINDS]
        if unknown:
            raise DataError(f"unknown injection kinds: {unknown}")
        if not self.target_attrs:
            raise DataError("at least one target attribute required")


@dataclass(frozen=True)
class EvalResult:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int


def generate(spec: SynthSpec) -> Dataset:
    """Draw a dataset column by column from one seeded generator."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows
    attrs: list[tuple[str, AttributeKind]] = []
    columns: list[list] = []
    for name, mean, std in spec.numeric_attrs:
        attrs.append((name, AttributeKind.NUMERIC))
        columns.append([float(v) for v in rng.normal(mean, std, size=n)])
    nominals = list(spec.nominal_attrs)
    if spec.target_attr is not None:
        nominals.append(spec.target_attr)
    for name, dist in nominals:
        attrs.append((name, AttributeKind.NOMINAL))
        labels = [lab for lab, _ in dist]
        probs = np.array([p for _, p in dist], dtype=np.float64)
        probs = probs / probs.sum()
        draws = rng.choice(len(labels), size=n, p=probs)
        columns.append([labels[int(d)] for d in draws])
    schema = Schema(tuple(attrs))
    rows = [tuple(col[i] for col in columns) for i in range(n)]
    return Dataset.from_rows(schema, rows)


def _compatible_kinds(ds: Dataset, attr: str, kinds) -> list[str]:
    out = []
    kind = ds.schema.kind_of(attr)
    for k in kinds:
        if k == POINT_OUTLIER and kind is AttributeKind.NUMERIC:
            out.append(k)
        elif k == LABEL_NOISE and kind is AttributeKind.NOMINAL and len(ds.categories(attr)) >= 2:
            out.append(k)
        elif k == MISSING_BURST:
            out.append(k)
    return out


def inject(ds: Dataset, spec: InjectionSpec) -> tuple[Dataset, np.ndarray]:
    """Corrupt ceil(rate * n) distinct rows, one cell each, and return the
    corrupted dataset plus the ground-truth mask."""
    n = ds.n_rows
    count = math.ceil(spec.rate * n)
    if count == 0:
        raise DataError("injection rate rounds to zero rows")
    if count > n:
        raise DataError("injection rate exceeds the dataset")
    compatible = {}
    for attr in spec.target_attrs:
        if attr not in ds.schema:
            raise SchemaError(f"unknown injection target: {attr!r}")
        kinds = _compatible_kinds(ds, attr, spec.kinds)
        if not kinds:
            raise DataError(f"no configured kind applies to attribute {attr!r}")
        compatible[attr] = kinds

    rng = np.random.default_rng(spec.seed)
    rows = rng.choice(n, size=count, replace=False)
    numeric = {name: ds.numeric_column(name).copy() for name in ds.schema.numeric_names()}
    codes = {name: ds.nominal_codes(name).copy() for name in ds.schema.nominal_names()}
    stats = {}
    for name in ds.schema.numeric_names():
        col = numeric[name]
        obs = col[~np.isnan(col)]
        if len(obs) > 0:
            std = float(obs.std())
            stats[name] = (float(obs.mean()), std if std > 0 else 1.0)
        else:
            stats[name] = (0.0, 1.0)

    truth = np.zeros(n, dtype=bool)
    for r in rows:
        r = int(r)
        truth[r] = True
        attr = spec.target_attrs[int(rng.integers(len(spec.target_attrs)))]
        kinds = compatible[attr]
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == POINT_OUTLIER:
            mean, std = stats[attr]
            sign = 1.0 if rng.integers(2) == 1 else -1.0
            numeric[attr][r] = mean + sign * spec.magnitude * std
        elif kind == LABEL_NOISE:
            cats = ds.categories(attr)
            current = codes[attr][r]
            options = [c for c in range(len(cats)) if c != current]
            codes[attr][r] = options[int(rng.integers(len(options)))]
        else:  # missing burst
            if ds.schema.kind_of(attr) is AttributeKind.NUMERIC:
                numeric[attr][r] = np.nan
            else:
                codes[attr][r] = -1

    categories = {name: ds.categories(name) for name in ds.schema.nominal_names()}
    corrupted = Dataset(ds.schema, numeric, codes, categories, ds.row_ids)
    return corrupted, truth


def evaluate(flags, truth) -> EvalResult:
    """Precision/recall/F1 with the 0/0 -> 1 convention on both ratios."""
    flags = np.asarray(flags, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if flags.shape != truth.shape:
        raise DataError(f"length mismatch: {flags.shape} vs {truth.shape}")
    tp = int((flags & truth).sum())
    fp = int((flags & ~truth).sum())
    fn = int((~flags & truth).sum())
    tn = int((~flags & ~truth).sum())
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalResult(precision, recall, f1, tp, fp, tn, fn)


def _dist(*pairs) -> tuple[tuple[str, float], ...]:
    return tuple(pairs)


def affidavit_like_spec(n_rows: int, seed: int = 0) -> SynthSpec:
    """A 24-attribute table shaped like a real-estate affidavit export:
    8 numeric fields, 15 mostly low-entropy nominal descriptors, and the
    declared-value class attribute."""
    numeric = (
        ("ddjj_id", 50_000.0, 15_000.0),
        ("ano", 2008.0, 3.5),
        ("persona_id", 2_500.0, 900.0),
        ("ingreso", 90_000.0, 30_000.0),
        ("cant_acciones", 120.0, 60.0),
        ("porcentaje", 50.0, 20.0),
        ("superficiem2", 350.0, 180.0),
        ("valor_patrim", 180_000.0, 90_000.0),
    )
    nominal = (
        ("tipo_ddjj", _dist(("anual", 0.98), ("alta", 0.015), ("baja", 0.005))),
        ("poder", _dist(("legislativo", 0.98), ("ejecutivo", 0.015), ("judicial", 0.005))),
        ("nombre_tipo", _dist(("titular", 0.98), ("apoderado", 0.02))),
        ("cargo", _dist(("diputado", 0.98), ("senador", 0.015), ("ministro", 0.005))),
        ("jurisdiccion", _dist(("nacional", 0.98), ("provincial", 0.02))),
        ("descripcion_del_bien", _dist(("inmueble", 0.98), ("terreno", 0.015), ("cochera", 0.005))),
        ("destino", _dist(("vivienda", 0.98), ("renta", 0.015), ("veraneo", 0.005))),
        ("localidad", _dist(("caba", 0.98), ("la_plata", 0.015), ("posadas", 0.005))),
        ("nombre_bien_s", _dist(("casa", 0.98), ("departamento", 0.015), ("ph", 0.005))),
        ("origen", _dist(("compra", 0.98), ("herencia", 0.02))),
        ("pais", _dist(("argentina", 0.98), ("uruguay", 0.02))),
        ("provincia", _dist(("buenos_aires", 0.98), ("cordoba", 0.015), ("misiones", 0.005))),
        ("tipo_bien_s", _dist(("urbano", 0.98), ("rural", 0.02))),
        ("titular_dominio", _dist(("funcionario", 0.98), ("conyuge", 0.02))),
        ("vinculo", _dist(("titular", 0.98), ("conviviente", 0.015), ("hijo", 0.005))),
    )
    target = ("val_decl", _dist(("Fiscal", 0.40), ("Subfiscal", 0.30),
                                ("Market", 0.05), ("NotDeclared", 0.25)))
    return SynthSpec(n_rows, numeric, nominal, target, seed)


def default_injection(seed: int = 0, rate: float = 0.05,
                      magnitude: float = DEFAULT_MAGNITUDE) -> InjectionSpec:
    """Point outliers spread over the numeric fields of the affidavit preset."""
    return InjectionSpec(rate, (POINT_OUTLIER,),
                         ("ddjj_id", "ano", "persona_id", "ingreso",
                          "cant_acciones", "porcentaje", "superficiem2",
                          "valor_patrim"),
                         magnitude, seed)
