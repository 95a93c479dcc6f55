"""JSON serialization of reports with stable field names and key order.

Everything the CLI writes goes through here so that re-runs with the same
config and seed are byte-identical: keys are sorted, floats use Python's
shortest repr, and numpy scalars are converted to plain Python values.
"""

from __future__ import annotations

import datetime
import json
import os

import numpy as np

from .detectors import AttributeRanking
from .learners import NominalCondition, NumericCondition, Rule
from .procedures import BinReport, OutlierReport
from .synth import EvalResult

TOOL_NAME = "affidavit-audit"
TOOL_VERSION = "0.1.0"


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def condition_to_json(cond) -> dict:
    if isinstance(cond, NominalCondition):
        return {"attribute": cond.attribute, "kind": "equals", "value": cond.label}
    if isinstance(cond, NumericCondition):
        return {"attribute": cond.attribute, "kind": "interval",
                "gt": cond.lo, "le": cond.hi}
    raise TypeError(f"not a condition: {cond!r}")


def rule_to_json(rule: Rule) -> dict:
    return {
        "conditions": [condition_to_json(c) for c in rule.antecedent],
        "prediction": rule.consequent,
        "coverage": rule.coverage,
        "accuracy": rule.accuracy,
    }


def bin_report_to_json(report: BinReport) -> dict:
    return {
        "input_attribute": report.input_attribute,
        "target_attribute": report.target_attribute,
        "outlier_count": report.outlier_count,
        "outlier_row_ids": list(report.outlier_row_ids),
        "profile": {"input": _plain(report.profile_input),
                    "target": _plain(report.profile_target)},
        "skipped": report.skipped,
        "note": report.note,
    }


def outlier_report_to_json(report: OutlierReport) -> dict:
    return {
        "flagged_row_ids": list(report.flagged_row_ids),
        "total_rows": report.total_rows,
        "flagged_fraction": report.flagged_fraction,
        "per_detector": _plain(report.per_detector),
        "provenance": _plain(report.provenance),
        "notes": list(report.notes),
    }


def ranking_to_json(ranking: AttributeRanking) -> list:
    return [{"attribute": name, "distance": dist} for name, dist in ranking.entries]


def eval_to_json(result: EvalResult) -> dict:
    return {
        "precision": result.precision,
        "recall": result.recall,
        "f1": result.f1,
        "confusion": {"tp": result.tp, "fp": result.fp,
                      "tn": result.tn, "fn": result.fn},
    }


def timestamp() -> str:
    """UTC ISO-8601; honors SOURCE_DATE_EPOCH for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        dt = datetime.datetime.fromtimestamp(int(epoch), datetime.timezone.utc)
    else:
        dt = datetime.datetime.now(datetime.timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def envelope(command: str, config_echo: dict, seed: int, payload,
             warnings: list[str]) -> dict:
    return {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "timestamp": timestamp(),
        "command": command,
        "seed": seed,
        "config": _plain(config_echo),
        "warnings": list(warnings),
        "payload": _plain(payload),
    }


def dumps(document) -> str:
    return json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
