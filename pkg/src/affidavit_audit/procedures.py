"""The two audit pipelines.

Pipeline one screens a table against a target attribute: the top-ranked
input attributes (by gain ratio) are projected into two-column bins and
each bin is screened with LOF.  Pipeline two needs no target: LOF and
DBSCAN cast a first vote over the whole table, a classifier committee
(C4.5, PRISM, naive Bayes trained on the provisional labels) confirms or
vetoes each flag, and K-Means with two clusters over the flagged rows
ranks attributes by inter-centroid distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import detectors, learners, tabular
from .detectors import (NOISE, AttributeRanking, Clustering, LofResult,
                        centroid_attribute_distances, dbscan_from_matrix,
                        kmeans, lof_from_matrix)
from .errors import DataError
from .learners import (attribute_scores, c45_build, nb_predict, nb_train,
                       prism_build, rules_predict_all, tree_predict_all,
                       tree_to_rules)
from .tabular import (AttributeKind, BinMethod, Dataset, column_stats,
                      discretize, pairwise_distances)

OUTLIER = "outlier"
INLIER = "inlier"

RULE_UNION = "union"
RULE_INTERSECTION = "intersection"


@dataclass(frozen=True)
class VoteConfig:
    phase1_rule: str = RULE_UNION
    classifier_quorum: int = 2

    def __post_init__(self):
        if self.phase1_rule not in (RULE_UNION, RULE_INTERSECTION):
            raise DataError(f"unknown phase1 rule: {self.phase1_rule!r}")
        if not 1 <= self.classifier_quorum <= 3:
            raise DataError("classifier_quorum must be in [1, 3]")


@dataclass(frozen=True)
class AuditConfig:
    lof_k: int = detectors.DEFAULT_LOF_K
    lof_threshold: float = detectors.DEFAULT_LOF_THRESHOLD
    dbscan_eps: float = detectors.DEFAULT_DBSCAN_EPS
    dbscan_min_pts: int = detectors.DEFAULT_DBSCAN_MIN_PTS
    vote: VoteConfig = field(default_factory=VoteConfig)
    n_bins: int = 6
    seed: int = 0
    kmeans_max_iter: int = detectors.DEFAULT_KMEANS_MAX_ITER
    c45_min_leaf: int = learners.DEFAULT_MIN_LEAF
    c45_min_gain: float = learners.DEFAULT_MIN_GAIN
    prune_confidence: float = learners.DEFAULT_PRUNE_CONFIDENCE
    prism_bins: int = 5


@dataclass(frozen=True)
class Bin:
    input_attribute: str
    target_attribute: str
    data: Dataset                       # two-column projection with row_ids
    score: learners.AttributeScore


@dataclass(frozen=True)
class BinReport:
    input_attribute: str
    target_attribute: str
    outlier_count: int
    outlier_row_ids: tuple[int, ...]
    profile_input: float | str | None   # mean (numeric) or mode (nominal) of flagged rows
    profile_target: str | None          # mode of the target over flagged rows
    skipped: bool = False
    note: str | None = None


@dataclass(frozen=True)
class Phase1Result:
    provisional: np.ndarray             # bool per row
    lof_scores: np.ndarray
    lof_flags: np.ndarray
    dbscan_labels: np.ndarray


@dataclass(frozen=True)
class OutlierReport:
    flagged_row_ids: tuple[int, ...]
    total_rows: int
    per_detector: dict
    provenance: dict
    notes: tuple[str, ...] = ()

    @property
    def flagged_fraction(self) -> float:
        return len(self.flagged_row_ids) / self.total_rows if self.total_rows else 0.0


@dataclass(frozen=True)
class ProcedureTwoResult:
    report: OutlierReport
    ranking: AttributeRanking
    rules: tuple[learners.Rule, ...]
    clustering: Clustering | None


def build_bins(ds: Dataset, target: str, n_bins: int = 6) -> list[Bin]:
    """Two-column projections of the top-ranked input attributes."""
    scores = attribute_scores(ds, target)
    if n_bins < 1 or n_bins > len(scores):
        raise DataError(
            f"n_bins must be in [1, {len(scores)}], got {n_bins}")
    return [Bin(s.attribute, target, ds.project([s.attribute, target]), s)
            for s in scores[:n_bins]]


def bin_detection_view(b: Bin) -> Dataset:
    """Rows of the bin with both values observed; LOF runs on exactly this."""
    keep = np.array([
        b.data.value(i, b.input_attribute) is not None
        and b.data.value(i, b.target_attribute) is not None
        for i in range(b.data.n_rows)], dtype=bool)
    return b.data.take(keep)


def _profile_value(view: Dataset, attr: str, flags: np.ndarray):
    flagged = view.take(flags)
    if flagged.n_rows == 0:
        return None
    stats = column_stats(flagged, attr)
    if view.schema.kind_of(attr) is AttributeKind.NUMERIC:
        return stats.mean
    return stats.mode


def procedure_one(ds: Dataset, target: str, cfg: AuditConfig = AuditConfig()) -> list[BinReport]:
    """Per-bin LOF screening against the target attribute.

    Bins with fewer than lof_k + 1 fully observed rows are reported as
    skipped instead of aborting the audit.  The flagged row ids of each bin
    are exactly those of a standalone LOF run on the bin's observed rows.
    """
    reports = []
    for b in build_bins(ds, target, cfg.n_bins):
        view = bin_detection_view(b)
        if view.n_rows < cfg.lof_k + 1:
            reports.append(BinReport(
                b.input_attribute, target, 0, (), None, None, skipped=True,
                note=f"only {view.n_rows} observed rows; need at least {cfg.lof_k + 1}"))
            continue
        result = detectors.lof_scores(view, cfg.lof_k)
        flags = detectors.lof_flag(result, cfg.lof_threshold)
        row_ids = tuple(int(r) for r in view.row_ids[flags])
        reports.append(BinReport(
            b.input_attribute, target, int(flags.sum()), row_ids,
            _profile_value(view, b.input_attribute, flags),
            _profile_value(view, target, flags)))
    return reports


def phase1_detect(ds: Dataset, cfg: AuditConfig = AuditConfig(),
                  dist: np.ndarray | None = None) -> Phase1Result:
    """LOF flags and DBSCAN noise over the full table, combined per the vote rule."""
    if dist is None:
        dist = pairwise_distances(ds)
    scores = lof_from_matrix(dist, cfg.lof_k)
    lof_flags = scores > cfg.lof_threshold
    labels = dbscan_from_matrix(dist, cfg.dbscan_eps, cfg.dbscan_min_pts)
    noise = labels == NOISE
    if cfg.vote.phase1_rule == RULE_UNION:
        provisional = lof_flags | noise
    else:
        provisional = lof_flags & noise
    return Phase1Result(provisional, scores, lof_flags, labels)


def _temp_target_name(ds: Dataset) -> str:
    name = "provisional_label"
    while name in ds.schema:
        name += "_"
    return name


def _discretized_view(ds: Dataset, n_bins: int) -> Dataset:
    """All-nominal copy for PRISM and naive Bayes; numeric columns get
    equal-frequency bins, all-missing numeric columns are dropped."""
    out = ds
    for name in ds.schema.numeric_names():
        col = ds.numeric_column(name)
        if np.isnan(col).all():
            out = out.drop([name])
            continue
        out = discretize(out, name, n_bins, BinMethod.EQUAL_FREQUENCY)
    return out


def classifier_refine(ds: Dataset, provisional: np.ndarray,
                      cfg: AuditConfig = AuditConfig()):
    """Confirm provisional flags with a committee of C4.5, PRISM and naive
    Bayes trained on the provisional labels; a flag survives when at least
    classifier_quorum members predict it.  Refinement only removes flags.

    Returns (final_flags, evidence) where evidence carries the per-model
    predictions and the rules read off the committee's decision tree.
    """
    provisional = np.asarray(provisional, dtype=bool)
    if provisional.all() or not provisional.any():
        return provisional.copy(), {"skipped": True, "rules": ()}

    tmp = _temp_target_name(ds)
    labels = [OUTLIER if f else INLIER for f in provisional]
    train = ds.with_nominal(tmp, labels)

    tree = c45_build(train, tmp, cfg.c45_min_leaf, cfg.c45_min_gain,
                     cfg.prune_confidence)
    c45_pred = tree_predict_all(tree, train)
    rules = tree_to_rules(tree, train)

    disc = _discretized_view(train, cfg.prism_bins)
    majority = OUTLIER if provisional.sum() * 2 > len(provisional) else INLIER
    prism_rules = prism_build(disc, tmp)
    prism_pred = rules_predict_all(prism_rules, disc, majority)
    model = nb_train(disc, tmp)
    nb_pred = [nb_predict(model, disc, i)[0] for i in range(disc.n_rows)]

    votes = np.array([
        (c45_pred[i] == OUTLIER) + (prism_pred[i] == OUTLIER) + (nb_pred[i] == OUTLIER)
        for i in range(ds.n_rows)])
    final = provisional & (votes >= cfg.vote.classifier_quorum)
    evidence = {
        "skipped": False,
        "c45": c45_pred,
        "prism": prism_pred,
        "nb": nb_pred,
        "rules": tuple(rules),
        "prism_rules": tuple(prism_rules),
    }
    return final, evidence


def procedure_two(ds: Dataset, cfg: AuditConfig = AuditConfig()) -> ProcedureTwoResult:
    """Full no-target sweep: density vote, classifier confirmation, then a
    two-cluster K-Means over the flagged rows to rank attributes."""
    dist = pairwise_distances(ds)
    p1 = phase1_detect(ds, cfg, dist)
    notes: list[str] = []
    if not p1.provisional.any():
        final = p1.provisional.copy()
        evidence = {"skipped": True, "rules": ()}
        notes.append("no detector fired; nothing to refine")
    else:
        final, evidence = classifier_refine(ds, p1.provisional, cfg)
        if evidence.get("skipped"):
            notes.append("single-class provisional labels; refinement skipped")

    flagged_ids = tuple(int(r) for r in ds.row_ids[final])
    per_detector = {
        "lof": {"k": cfg.lof_k, "threshold": cfg.lof_threshold,
                "scores": p1.lof_scores, "flags": p1.lof_flags},
        "dbscan": {"eps": cfg.dbscan_eps, "min_pts": cfg.dbscan_min_pts,
                   "labels": p1.dbscan_labels},
    }
    if not evidence.get("skipped"):
        per_detector["classifiers"] = {
            "c45": evidence["c45"], "prism": evidence["prism"], "nb": evidence["nb"]}
    provenance = {
        "lof_k": cfg.lof_k, "lof_threshold": cfg.lof_threshold,
        "dbscan_eps": cfg.dbscan_eps, "dbscan_min_pts": cfg.dbscan_min_pts,
        "phase1_rule": cfg.vote.phase1_rule,
        "classifier_quorum": cfg.vote.classifier_quorum,
        "seed": cfg.seed,
    }

    clustering = None
    if len(flagged_ids) >= 2:
        outlier_db = ds.take(final)
        clustering = kmeans(outlier_db, 2, cfg.seed, cfg.kmeans_max_iter)
        ranking = centroid_attribute_distances(clustering, outlier_db)
    else:
        ranking = AttributeRanking(())
        notes.append("fewer than 2 flagged rows; attribute ranking is empty")

    report = OutlierReport(flagged_ids, ds.n_rows, per_detector, provenance,
                           tuple(notes))
    return ProcedureTwoResult(report, ranking, tuple(evidence.get("rules", ())),
                              clustering)
