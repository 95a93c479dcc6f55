"""Preparation pipeline for real-estate affidavit exports.

Raw exports mix currencies, area units and valuation bases.  The pipeline
prunes attributes, converts valuations to constant pesos of a base year
(user-supplied FX and CPI tables), homogenizes areas to square meters, and
labels each declared value against its fiscal reference.  Rows are never
dropped: unconvertible cells become missing and a warning lands in the
preparation log.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, DataError, SchemaError
from .tabular import AttributeKind, Dataset, load_csv

AREA_FACTORS = {
    "m2": 1.0,
    "ha": 10_000.0,
    "km2": 1_000_000.0,
    "ft2": 0.09290304,  # exact international foot
}

FISCAL = "Fiscal"
SUBFISCAL = "Subfiscal"
MARKET = "Market"
NOT_DECLARED = "NotDeclared"

VALUE_FIELD = "valor_patrim"
AREA_FIELD = "superficiem2"
CLASS_FIELD = "val_decl"

DEFAULT_TOLERANCE = 0.10


@dataclass(frozen=True)
class FxTable:
    """Pesos-per-unit rates by (currency, year); the peso itself is implicit."""
    rates: dict
    peso_code: str = "ARS"

    def __post_init__(self):
        for key, rate in self.rates.items():
            if rate <= 0:
                raise DataError(f"fx rate for {key} must be > 0, got {rate}")

    def rate(self, currency: str, year: int) -> float:
        if currency == self.peso_code:
            return 1.0
        try:
            return self.rates[(currency, year)]
        except KeyError:
            raise DataError(f"no fx rate for ({currency}, {year})") from None

    @classmethod
    def from_csv(cls, path, peso_code: str = "ARS") -> "FxTable":
        rates = {}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"currency", "year", "rate"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise DataError(f"fx table needs columns {sorted(required)}")
            for rec in reader:
                rates[(rec["currency"], int(float(rec["year"])))] = float(rec["rate"])
        return cls(rates, peso_code)


@dataclass(frozen=True)
class CpiTable:
    """Price index level per year plus the base year valuations deflate to."""
    levels: dict
    base_year: int

    def __post_init__(self):
        for year, level in self.levels.items():
            if level <= 0:
                raise DataError(f"cpi level for {year} must be > 0, got {level}")
        if self.base_year not in self.levels:
            raise DataError(f"base year {self.base_year} not in cpi table")

    def level(self, year: int) -> float:
        try:
            return self.levels[year]
        except KeyError:
            raise DataError(f"no cpi level for year {year}") from None

    @classmethod
    def from_csv(cls, path, base_year: int) -> "CpiTable":
        levels = {}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"year", "index"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise DataError(f"cpi table needs columns {sorted(required)}")
            for rec in reader:
                levels[int(float(rec["year"]))] = float(rec["index"])
        return cls(levels, base_year)


@dataclass(frozen=True)
class PrepWarning:
    row_id: int
    field: str
    message: str

    def to_json(self) -> dict:
        return {"row_id": self.row_id, "field": self.field, "message": self.message}


@dataclass(frozen=True)
class PrepConfig:
    keep: tuple[str, ...]
    value_column: str
    currency_column: str
    year_column: str
    area_column: str
    area_unit_column: str
    reference_column: str
    fx: FxTable
    cpi: CpiTable
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if not 0 < self.tolerance < 1:
            raise ConfigError(f"tolerance must be in (0, 1), got {self.tolerance}")


def select_attributes(raw: Dataset, keep) -> Dataset:
    """Column projection in the order of ``keep``; row_ids survive."""
    keep = list(keep)
    if not keep:
        raise DataError("keep list must not be empty")
    unknown = [n for n in keep if n not in raw.schema]
    if unknown:
        raise SchemaError(f"unknown attributes: {unknown}")
    return raw.project(keep)


def convert_valuation(amount: float, currency: str, year: int,
                      fx: FxTable, cpi: CpiTable) -> float:
    """amount * fx(currency, year) * cpi(base) / cpi(year)."""
    rate = fx.rate(currency, year)
    return amount * rate * cpi.level(cpi.base_year) / cpi.level(year)


def homogenize_area(value: float, unit: str) -> float:
    """Convert an area to square meters; factors are exact."""
    if value < 0:
        raise DataError(f"area must be non-negative, got {value}")
    try:
        factor = AREA_FACTORS[unit.strip().lower()]
    except (KeyError, AttributeError):
        raise DataError(f"unknown area unit: {unit!r}") from None
    return value * factor


def classify_declared_value(declared, reference, tolerance: float = DEFAULT_TOLERANCE) -> str:
    """Label a declared value against its fiscal reference.

    Missing or zero declared values are NotDeclared; a missing reference
    also yields NotDeclared (the pipeline logs it); a zero reference with a
    positive declared value is Market.  Otherwise the ratio r = declared /
    reference labels Subfiscal (r < 1 - tolerance), Fiscal (within the
    band) or Market (r > 1 + tolerance).
    """
    if not 0 < tolerance < 1:
        raise DataError(f"tolerance must be in (0, 1), got {tolerance}")
    if declared is None or declared == 0:
        return NOT_DECLARED
    if reference is None:
        return NOT_DECLARED
    if reference == 0:
        return MARKET
    r = declared / reference
    if r < 1 - tolerance:
        return SUBFISCAL
    if r > 1 + tolerance:
        return MARKET
    return FISCAL


def _as_year(v) -> int | None:
    if v is None:
        return None
    if isinstance(v, float):
        return int(v) if v.is_integer() else None
    try:
        return int(str(v))
    except ValueError:
        return None


def prepare(raw: Dataset, cfg: PrepConfig) -> tuple[Dataset, list[PrepWarning]]:
    """Run the full preparation: select, convert, homogenize, classify.

    Every row is retained; cells that cannot be converted become missing
    with a logged warning.  Currency and unit markers of successfully
    converted rows are rewritten to the peso code and "m2" so a second run
    over prepared data is a no-op.
    """
    roles = {
        "value": cfg.value_column, "currency": cfg.currency_column,
        "year": cfg.year_column, "area": cfg.area_column,
        "area_unit": cfg.area_unit_column, "reference": cfg.reference_column,
    }
    missing_cols = sorted({c for c in roles.values() if c not in raw.schema})
    if missing_cols:
        raise ConfigError(f"config names absent columns: {missing_cols}")
    not_kept = sorted({c for c in roles.values() if c not in cfg.keep})
    if not_kept:
        raise ConfigError(
            f"role columns must be in the keep list, missing: {not_kept}")
    for col in (cfg.value_column, cfg.area_column, cfg.reference_column):
        if raw.schema.kind_of(col) is not AttributeKind.NUMERIC:
            raise ConfigError(f"column {col!r} must be numeric")
    for generated, source in ((VALUE_FIELD, cfg.value_column), (AREA_FIELD, cfg.area_column)):
        if generated in cfg.keep and generated != source:
            raise ConfigError(
                f"kept column {generated!r} collides with a generated field")

    ds = select_attributes(raw, cfg.keep)
    warnings: list[PrepWarning] = []
    n = ds.n_rows

    values: list[float | None] = []
    currencies: list[str | None] = []
    for i in range(n):
        rid = int(ds.row_ids[i])
        amount = ds.value(i, cfg.value_column)
        currency = ds.value(i, cfg.currency_column)
        year = _as_year(ds.value(i, cfg.year_column))
        if amount is None:
            values.append(None)
            currencies.append(currency)
            continue
        if currency is None:
            warnings.append(PrepWarning(rid, VALUE_FIELD, "missing currency"))
            values.append(None)
            currencies.append(None)
            continue
        if year is None:
            warnings.append(PrepWarning(rid, VALUE_FIELD, "missing or non-integer year"))
            values.append(None)
            currencies.append(currency)
            continue
        try:
            values.append(convert_valuation(amount, currency, year, cfg.fx, cfg.cpi))
            currencies.append(cfg.fx.peso_code)
        except DataError as exc:
            warnings.append(PrepWarning(rid, VALUE_FIELD, str(exc)))
            values.append(None)
            currencies.append(currency)

    areas: list[float | None] = []
    units: list[str | None] = []
    for i in range(n):
        rid = int(ds.row_ids[i])
        area = ds.value(i, cfg.area_column)
        unit = ds.value(i, cfg.area_unit_column)
        if area is None:
            areas.append(None)
            units.append(unit)
            continue
        if unit is None:
            warnings.append(PrepWarning(rid, AREA_FIELD, "missing area unit"))
            areas.append(None)
            units.append(None)
            continue
        try:
            areas.append(homogenize_area(area, unit))
            units.append("m2")
        except DataError as exc:
            warnings.append(PrepWarning(rid, AREA_FIELD, str(exc)))
            areas.append(None)
            units.append(unit)

    classes: list[str] = []
    for i in range(n):
        rid = int(ds.row_ids[i])
        declared = values[i]
        reference = ds.value(i, cfg.reference_column)
        if declared is not None and declared != 0:
            if reference is None:
                warnings.append(PrepWarning(
                    rid, CLASS_FIELD, "missing fiscal reference"))
            elif reference == 0:
                warnings.append(PrepWarning(
                    rid, CLASS_FIELD, "zero fiscal reference; labeled Market"))
        classes.append(classify_declared_value(declared, reference, cfg.tolerance))

    out = ds.with_numeric(VALUE_FIELD, values, replacing=cfg.value_column)
    out = out.with_numeric(AREA_FIELD, areas, replacing=cfg.area_column)
    out = out.with_nominal(cfg.currency_column, currencies, replacing=cfg.currency_column)
    out = out.with_nominal(cfg.area_unit_column, units, replacing=cfg.area_unit_column)
    out = out.with_nominal(CLASS_FIELD, classes,
                           replacing=CLASS_FIELD if CLASS_FIELD in out.schema else None)
    return out, warnings


def write_prep_log(warnings, target) -> None:
    """JSON-lines preparation log, one entry per warning, row order."""
    own = isinstance(target, (str, Path))
    fh = open(target, "w", encoding="utf-8") if own else target
    try:
        for w in warnings:
            fh.write(json.dumps(w.to_json(), sort_keys=True, ensure_ascii=False))
            fh.write("\n")
    finally:
        if own:
            fh.close()
