"""Command-line front end: prepare, proc1, proc2, synth, eval.

Every command is a pure function of (config file, input files, seed) to
(output files, exit code).  Outputs are staged in full and renamed into
place only on success, so a nonzero exit never leaves partial files.
Exit codes: 0 ok, 2 config error, 3 data error, 4 quality gate failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfg_mod
from . import reporting
from .errors import (AuditError, ConfigError, DataError, ParseError,
                     QualityGateError, SchemaError)
from .prep import CpiTable, FxTable, PrepConfig, prepare
from .procedures import procedure_one, procedure_two
from .synth import evaluate, generate, inject
from .tabular import AttributeKind, Dataset, format_number, load_csv, write_csv

PREPARED_CSV = "prepared.csv"
PREP_LOG = "prepare_log.jsonl"
PREP_REPORT = "prepare_report.json"
PROC1_REPORT = "proc1_report.json"
PROC2_REPORT = "proc2_report.json"
FLAGGED_CSV = "flagged_rows.csv"
SYNTH_CSV = "synthetic.csv"
TRUTH_CSV = "ground_truth.csv"
SYNTH_REPORT = "synth_report.json"
EVAL_REPORT = "eval_report.json"


def _csv_bytes(ds: Dataset) -> bytes:
    buf = io.StringIO()
    write_csv(ds, buf)
    return buf.getvalue().encode("utf-8")


def _flagged_csv_bytes(ds: Dataset, row_ids) -> bytes:
    wanted = set(int(r) for r in row_ids)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row_id", *ds.schema.names])
    for i in range(ds.n_rows):
        rid = int(ds.row_ids[i])
        if rid not in wanted:
            continue
        rec = [str(rid)]
        for name in ds.schema.names:
            v = ds.value(i, name)
            if v is None:
                rec.append("")
            elif isinstance(v, str):
                rec.append(v)
            else:
                rec.append(format_number(v))
        writer.writerow(rec)
    return buf.getvalue().encode("utf-8")


def _load_dataset(cfg: cfg_mod.RunConfig) -> Dataset:
    path = cfg_mod.input_path(cfg, "dataset")
    return load_csv(path, cfg_mod.kind_hints(cfg), cfg_mod.missing_sentinels(cfg))


def _envelope_bytes(command, cfg, seed, payload, warnings) -> bytes:
    doc = reporting.envelope(command, cfg.raw, seed, payload, warnings)
    return reporting.dumps(doc).encode("utf-8")


def cmd_prepare(cfg: cfg_mod.RunConfig, seed: int):
    section = cfg.get("prepare")
    if not isinstance(section, dict):
        raise ConfigError("config needs a prepare section")
    for key in ("keep", "columns", "fx_table", "cpi_table", "base_year"):
        if key not in section:
            raise ConfigError(f"prepare section is missing {key!r}")
    columns = section["columns"]
    for role in ("value", "currency", "year", "area", "area_unit", "reference"):
        if role not in columns:
            raise ConfigError(f"prepare.columns is missing the {role!r} role")
    peso = section.get("peso_code", "ARS")
    fx_path = cfg_mod.resolve_path(cfg, section["fx_table"])
    cpi_path = cfg_mod.resolve_path(cfg, section["cpi_table"])
    for p in (fx_path, cpi_path):
        if not p.exists():
            raise ConfigError(f"table does not exist: {p}")
    raw = _load_dataset(cfg)
    pcfg = PrepConfig(
        keep=tuple(section["keep"]),
        value_column=columns["value"],
        currency_column=columns["currency"],
        year_column=columns["year"],
        area_column=columns["area"],
        area_unit_column=columns["area_unit"],
        reference_column=columns["reference"],
        fx=FxTable.from_csv(fx_path, peso),
        cpi=CpiTable.from_csv(cpi_path, int(section["base_year"])),
        tolerance=section.get("tolerance", 0.10),
    )
    prepared, warnings = prepare(raw, pcfg)

    log_lines = "".join(
        json.dumps(w.to_json(), sort_keys=True, ensure_ascii=False) + "\n"
        for w in warnings)
    payload = {
        "rows": prepared.n_rows,
        "columns": list(prepared.schema.names),
        "warning_count": len(warnings),
        "output": {"dataset": PREPARED_CSV, "log": PREP_LOG},
    }
    outputs = [
        (PREPARED_CSV, _csv_bytes(prepared)),
        (PREP_LOG, log_lines.encode("utf-8")),
        (PREP_REPORT, _envelope_bytes(
            "prepare", cfg, seed, payload,
            [f"{len(warnings)} cell(s) could not be converted"] if warnings else [])),
    ]
    return outputs, 0


def cmd_proc1(cfg: cfg_mod.RunConfig, seed: int):
    target = cfg.get("target")
    if not isinstance(target, str):
        raise ConfigError("config needs a target attribute name")
    ds = _load_dataset(cfg)
    if target not in ds.schema:
        raise ConfigError(f"target {target!r} not in dataset")
    if ds.schema.kind_of(target) is not AttributeKind.NOMINAL:
        raise ConfigError(f"target {target!r} must be nominal")
    acfg = cfg_mod.audit_config(cfg, seed)
    reports = procedure_one(ds, target, acfg)
    payload = [reporting.bin_report_to_json(r) for r in reports]
    warnings = [f"bin {r.input_attribute}: {r.note}" for r in reports if r.skipped]
    outputs = [(PROC1_REPORT, _envelope_bytes("proc1", cfg, acfg.seed, payload, warnings))]
    if cfg.get("export_flagged", True):
        flagged = sorted({rid for r in reports for rid in r.outlier_row_ids})
        outputs.append((FLAGGED_CSV, _flagged_csv_bytes(ds, flagged)))
    return outputs, 0


def cmd_proc2(cfg: cfg_mod.RunConfig, seed: int):
    ds = _load_dataset(cfg)
    acfg = cfg_mod.audit_config(cfg, seed)
    result = procedure_two(ds, acfg)
    payload = {
        "outlier_report": reporting.outlier_report_to_json(result.report),
        "attribute_ranking": reporting.ranking_to_json(result.ranking),
        "rules": [reporting.rule_to_json(r) for r in result.rules],
    }
    outputs = [(PROC2_REPORT, _envelope_bytes(
        "proc2", cfg, acfg.seed, payload, list(result.report.notes)))]
    if cfg.get("export_flagged", True):
        outputs.append((FLAGGED_CSV,
                        _flagged_csv_bytes(ds, result.report.flagged_row_ids)))
    return outputs, 0


def cmd_synth(cfg: cfg_mod.RunConfig, seed: int):
    spec, injection = cfg_mod.synth_specs(cfg)
    if seed != cfg.get("seed", 0):
        # --seed overrides both generation and injection draws
        spec = type(spec)(spec.n_rows, spec.numeric_attrs, spec.nominal_attrs,
                          spec.target_attr, seed)
        if injection is not None:
            injection = type(injection)(injection.rate, injection.kinds,
                                        injection.target_attrs,
                                        injection.magnitude, seed)
    ds = generate(spec)
    if injection is not None:
        ds, truth = inject(ds, injection)
    else:
        truth = np.zeros(ds.n_rows, dtype=bool)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row_id", "is_anomaly"])
    for rid, t in zip(ds.row_ids, truth):
        writer.writerow([str(int(rid)), "1" if t else "0"])
    payload = {
        "rows": ds.n_rows,
        "columns": list(ds.schema.names),
        "injected": int(truth.sum()),
        "output": {"dataset": SYNTH_CSV, "ground_truth": TRUTH_CSV},
    }
    outputs = [
        (SYNTH_CSV, _csv_bytes(ds)),
        (TRUTH_CSV, buf.getvalue().encode("utf-8")),
        (SYNTH_REPORT, _envelope_bytes("synth", cfg, seed, payload, [])),
    ]
    return outputs, 0


def _load_truth(path) -> tuple[list[int], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"row_id", "is_anomaly"} <= set(reader.fieldnames):
            raise DataError("ground truth needs columns row_id,is_anomaly")
        ids, vals = [], []
        for rec in reader:
            ids.append(int(rec["row_id"]))
            vals.append(rec["is_anomaly"].strip() in ("1", "true", "True"))
    return ids, np.array(vals, dtype=bool)


def cmd_eval(cfg: cfg_mod.RunConfig, seed: int):
    section = cfg.get("eval")
    if not isinstance(section, dict):
        raise ConfigError("config needs an eval section")
    for key in ("report", "truth"):
        if key not in section:
            raise ConfigError(f"eval section is missing {key!r}")
    report_path = cfg_mod.resolve_path(cfg, section["report"])
    truth_path = cfg_mod.resolve_path(cfg, section["truth"])
    for p in (report_path, truth_path):
        if not p.exists():
            raise ConfigError(f"eval input does not exist: {p}")
    floor = section.get("recall_floor", 0.6)
    if not isinstance(floor, (int, float)) or not 0 <= floor <= 1:
        raise ConfigError(f"recall_floor must be in [0, 1], got {floor!r}")

    with open(report_path, encoding="utf-8") as fh:
        report = json.load(fh)
    try:
        flagged = set(report["payload"]["outlier_report"]["flagged_row_ids"])
    except (KeyError, TypeError) as exc:
        raise DataError(f"report carries no flagged_row_ids: {exc}") from exc
    ids, truth = _load_truth(truth_path)
    known = set(ids)
    stray = sorted(flagged - known)
    if stray:
        raise DataError(f"flagged row_ids absent from ground truth: {stray[:5]}")
    flags = np.array([rid in flagged for rid in ids], dtype=bool)
    result = evaluate(flags, truth)

    payload = reporting.eval_to_json(result)
    payload["recall_floor"] = floor
    payload["gate_passed"] = result.recall >= floor
    outputs = [(EVAL_REPORT, _envelope_bytes("eval", cfg, seed, payload, []))]
    print(reporting.dumps(payload), end="")
    return outputs, 0 if result.recall >= floor else 4


HANDLERS = {
    "prepare": cmd_prepare,
    "proc1": cmd_proc1,
    "proc2": cmd_proc2,
    "synth": cmd_synth,
    "eval": cmd_eval,
}


def _write_outputs(out_dir: Path, outputs) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, data in outputs:
            tmp = out_dir / (name + ".tmp")
            with open(tmp, "wb") as fh:
                fh.write(data)
            staged.append((tmp, out_dir / name))
        for tmp, final in staged:
            os.replace(tmp, final)
    finally:
        for tmp, _ in staged:
            if tmp.exists():
                tmp.unlink()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="affidavit-audit",
        description="Outlier and noise screening for alphanumeric tables.")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "prepare": "run the affidavit preparation pipeline",
        "proc1": "screen input-output bins against a target attribute",
        "proc2": "full no-target outlier sweep with attribute ranking",
        "synth": "generate a synthetic benchmark dataset",
        "eval": "score detection flags against ground truth",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
    args = parser.parse_args(argv)

    try:
        cfg = cfg_mod.load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError(f"seed must be an integer, got {seed!r}")
        if args.out is not None:
            out_dir = Path(args.out)
        else:
            out_dir = cfg_mod.resolve_path(cfg, str(cfg.get("out_dir", ".")))
        outputs, code = HANDLERS[args.command](cfg, seed)
        _write_outputs(out_dir, outputs)
        for name, _ in outputs:
            print(f"wrote {out_dir / name}", file=sys.stderr)
        if code == 4:
            print("quality gate failed: recall below the configured floor",
                  file=sys.stderr)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, SchemaError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except QualityGateError as exc:
        print(f"quality gate: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
