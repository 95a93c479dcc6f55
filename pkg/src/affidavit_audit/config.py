"""Declarative JSON run configuration.

One config file drives every subcommand; each command validates only the
sections it needs.  The parsed raw document is echoed into every report so
an audit can be re-run from its own output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, DataError, SchemaError
from .procedures import AuditConfig, RULE_INTERSECTION, RULE_UNION, VoteConfig
from .synth import InjectionSpec, SynthSpec
from .tabular import AttributeKind, DEFAULT_MISSING_SENTINELS


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    path: Path

    def get(self, key, default=None):
        return self.raw.get(key, default)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return RunConfig(raw, path)


def _require(cfg: RunConfig, key: str):
    if key not in cfg.raw:
        raise ConfigError(f"config is missing required key: {key!r}")
    return cfg.raw[key]


def _number(key, value, lo=None, hi=None, integer=False,
            lo_open=False, hi_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise ConfigError(f"{key} out of range: {value!r}")
    if hi is not None and (value >= hi if hi_open else value > hi):
        raise ConfigError(f"{key} out of range: {value!r}")
    return int(value) if integer else float(value)


def resolve_path(cfg: RunConfig, value: str) -> Path:
    """Paths in the config resolve relative to the config file."""
    p = Path(value)
    return p if p.is_absolute() else cfg.path.parent / p


def input_path(cfg: RunConfig, key: str) -> Path:
    value = _require(cfg, key)
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a path string")
    p = resolve_path(cfg, value)
    if not p.exists():
        raise ConfigError(f"{key} does not exist: {p}")
    return p


def kind_hints(cfg: RunConfig) -> dict[str, AttributeKind]:
    hints = cfg.get("kind_hints", {})
    if not isinstance(hints, dict):
        raise ConfigError("kind_hints must be an object")
    out = {}
    for name, kind in hints.items():
        if kind not in ("numeric", "nominal"):
            raise ConfigError(f"kind hint for {name!r} must be numeric or nominal")
        out[name] = AttributeKind(kind)
    return out


def missing_sentinels(cfg: RunConfig) -> tuple[str, ...]:
    sentinels = cfg.get("missing_sentinels")
    if sentinels is None:
        return DEFAULT_MISSING_SENTINELS
    if not isinstance(sentinels, list) or not all(isinstance(s, str) for s in sentinels):
        raise ConfigError("missing_sentinels must be a list of strings")
    return tuple(sentinels)


def audit_config(cfg: RunConfig, seed_override: int | None = None) -> AuditConfig:
    det = cfg.get("detectors", {})
    vote = cfg.get("vote", {})
    c45 = cfg.get("c45", {})
    if not isinstance(det, dict) or not isinstance(vote, dict) or not isinstance(c45, dict):
        raise ConfigError("detectors, vote and c45 sections must be objects")
    rule = vote.get("phase1_rule", RULE_UNION)
    if rule not in (RULE_UNION, RULE_INTERSECTION):
        raise ConfigError(f"phase1_rule must be union or intersection, got {rule!r}")
    seed = seed_override if seed_override is not None else cfg.get("seed", 0)
    base = AuditConfig()
    return AuditConfig(
        lof_k=_number("detectors.lof_k", det.get("lof_k", base.lof_k),
                      lo=1, integer=True),
        lof_threshold=_number("detectors.lof_threshold",
                              det.get("lof_threshold", base.lof_threshold),
                              lo=0, lo_open=True),
        dbscan_eps=_number("detectors.dbscan_eps",
                           det.get("dbscan_eps", base.dbscan_eps), lo=0, lo_open=True),
        dbscan_min_pts=_number("detectors.dbscan_min_pts",
                               det.get("dbscan_min_pts", base.dbscan_min_pts),
                               lo=1, integer=True),
        vote=VoteConfig(rule, _number("vote.classifier_quorum",
                                      vote.get("classifier_quorum", 2),
                                      lo=1, hi=3, integer=True)),
        n_bins=_number("n_bins", cfg.get("n_bins", base.n_bins),
                       lo=1, integer=True),
        seed=_number("seed", seed, integer=True),
        kmeans_max_iter=_number("kmeans_max_iter",
                                cfg.get("kmeans_max_iter", base.kmeans_max_iter),
                                lo=1, integer=True),
        c45_min_leaf=_number("c45.min_leaf", c45.get("min_leaf", base.c45_min_leaf),
                             lo=1, integer=True),
        c45_min_gain=_number("c45.min_gain", c45.get("min_gain", base.c45_min_gain),
                             lo=0),
        prune_confidence=_number("c45.prune_confidence",
                                 c45.get("prune_confidence", base.prune_confidence),
                                 lo=0, hi=1, lo_open=True, hi_open=True),
        prism_bins=_number("prism_bins", cfg.get("prism_bins", base.prism_bins),
                           lo=2, integer=True),
    )


def synth_specs(cfg: RunConfig) -> tuple[SynthSpec, InjectionSpec | None]:
    from . import synth as synth_mod

    section = _require(cfg, "synth")
    if not isinstance(section, dict):
        raise ConfigError("synth section must be an object")
    seed = cfg.get("seed", 0)
    preset = section.get("preset")
    if preset is not None:
        if preset != "affidavit":
            raise ConfigError(f"unknown synth preset: {preset!r}")
        n_rows = _number("synth.n_rows", section.get("n_rows", 5000),
                         lo=1, integer=True)
        spec = synth_mod.affidavit_like_spec(n_rows, section.get("seed", seed))
    else:
        try:
            spec = SynthSpec(
                n_rows=_number("synth.n_rows", section.get("n_rows"),
                               lo=1, integer=True),
                numeric_attrs=tuple((a["name"], float(a["mean"]), float(a["std"]))
                                    for a in section.get("numeric_attrs", [])),
                nominal_attrs=tuple(
                    (a["name"], tuple((l["label"], float(l["p"])) for l in a["labels"]))
                    for a in section.get("nominal_attrs", [])),
                target_attr=None if section.get("target_attr") is None else (
                    section["target_attr"]["name"],
                    tuple((l["label"], float(l["p"]))
                          for l in section["target_attr"]["labels"])),
                seed=section.get("seed", seed),
            )
        except (KeyError, TypeError, DataError, SchemaError) as exc:
            raise ConfigError(f"bad synth spec: {exc}") from exc

    inj = cfg.get("inject")
    if inj is None:
        return spec, None
    if not isinstance(inj, dict):
        raise ConfigError("inject section must be an object")
    if inj.get("preset") == "affidavit":
        injection = synth_mod.default_injection(
            inj.get("seed", seed),
            _number("inject.rate", inj.get("rate", 0.05), lo=0, hi=0.5,
                    lo_open=True, hi_open=True),
            _number("inject.magnitude", inj.get("magnitude", 8.0), lo=0, lo_open=True))
    else:
        try:
            injection = InjectionSpec(
                rate=_number("inject.rate", inj.get("rate"), lo=0, hi=0.5,
                             lo_open=True, hi_open=True),
                kinds=tuple(inj.get("kinds", [])),
                target_attrs=tuple(inj.get("target_attrs", [])),
                magnitude=_number("inject.magnitude", inj.get("magnitude", 8.0),
                                  lo=0, lo_open=True),
                seed=inj.get("seed", seed),
            )
        except (KeyError, TypeError, DataError, SchemaError) as exc:
            raise ConfigError(f"bad injection spec: {exc}") from exc
    return spec, injection
