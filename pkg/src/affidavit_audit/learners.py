"""Supervised learners used by the audit procedures: information-theoretic
attribute ranking, a C4.5-style decision tree, PRISM covering rules, and a
Laplace-smoothed naive Bayes classifier.

Every tie-break is pinned so that training is deterministic: attributes tie
in schema order, classes in first-occurrence order, numeric thresholds at
the lowest winning midpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, SchemaError
from .tabular import AttributeKind, Dataset

DEFAULT_MIN_LEAF = 2
DEFAULT_MIN_GAIN = 1e-9
DEFAULT_PRUNE_CONFIDENCE = 0.25


def entropy(class_counts: Mapping[object, int] | Sequence[int]) -> float:
    """Shannon entropy in bits of a count distribution."""
    counts = list(class_counts.values()) if isinstance(class_counts, Mapping) else list(class_counts)
    if any(c < 0 for c in counts):
        raise DataError("negative count")
    total = sum(counts)
    if total == 0:
        raise DataError("entropy of an empty distribution is undefined")
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a (m, C) count matrix with positive row sums."""
    totals = counts.sum(axis=1, keepdims=True)
    p = counts / totals
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


@dataclass(frozen=True)
class AttributeScore:
    attribute: str
    gain: float
    split_info: float
    gain_ratio: float
    threshold: float | None = None  # winning midpoint for numeric attributes


class _Frame:
    """Target codes plus per-attribute arrays for the rows with an observed target."""

    def __init__(self, ds: Dataset, target: str):
        if ds.schema.kind_of(target) is not AttributeKind.NOMINAL:
            raise SchemaError(f"target {target!r} must be nominal")
        codes = ds.nominal_codes(target)
        keep = np.nonzero(codes >= 0)[0]
        if len(keep) == 0:
            raise DataError("no rows with an observed target value")
        self.ds = ds
        self.target = target
        self.rows = keep                       # positions in ds
        self.y = codes[keep].astype(np.int64)
        self.classes = ds.categories(target)
        self.n_classes = len(self.classes)
        self.attrs = [(n, k) for n, k in ds.schema.attributes if n != target]
        self.columns = {}
        for name, kind in self.attrs:
            if kind is AttributeKind.NUMERIC:
                self.columns[name] = ds.numeric_column(name)[keep]
            else:
                self.columns[name] = ds.nominal_codes(name)[keep]


def _nominal_gain(codes: np.ndarray, y: np.ndarray, n_classes: int,
                  n_universe: int) -> tuple[float, float]:
    obs = codes >= 0
    n_obs = int(obs.sum())
    if n_obs == 0:
        return 0.0, 0.0
    c = codes[obs].astype(np.int64)
    yo = y[obs]
    n_values = int(c.max()) + 1
    counts = np.bincount(c * n_classes + yo, minlength=n_values * n_classes)
    counts = counts.reshape(n_values, n_classes)
    sizes = counts.sum(axis=1)
    present = sizes > 0
    if present.sum() < 2:
        return 0.0, 0.0
    counts = counts[present]
    sizes = sizes[present]
    h_obs = _entropy_rows(counts.sum(axis=0)[None, :])[0]
    weights = sizes / n_obs
    cond = float((weights * _entropy_rows(counts)).sum())
    gain = (n_obs / n_universe) * max(h_obs - cond, 0.0)
    split_info = float(-(weights * np.log2(weights)).sum())
    return gain, split_info


def _numeric_gain(values: np.ndarray, y: np.ndarray, n_classes: int,
                  n_universe: int) -> tuple[float, float, float | None]:
    obs = ~np.isnan(values)
    n_obs = int(obs.sum())
    if n_obs < 2:
        return 0.0, 0.0, None
    v = values[obs]
    c = y[obs]
    order = np.argsort(v, kind="stable")
    v = v[order]
    c = c[order]
    cut_after = np.nonzero(v[1:] > v[:-1])[0]
    if len(cut_after) == 0:
        return 0.0, 0.0, None
    onehot = np.zeros((n_obs, n_classes), dtype=np.float64)
    onehot[np.arange(n_obs), c] = 1.0
    cum = np.cumsum(onehot, axis=0)
    left = cum[cut_after]
    total = cum[-1]
    right = total[None, :] - left
    nl = left.sum(axis=1)
    nr = right.sum(axis=1)
    h_obs = _entropy_rows(total[None, :])[0]
    cond = (nl / n_obs) * _entropy_rows(left) + (nr / n_obs) * _entropy_rows(right)
    gains = h_obs - cond
    best = int(np.argmax(gains))
    i = int(cut_after[best])
    threshold = (float(v[i]) + float(v[i + 1])) / 2.0
    gain = (n_obs / n_universe) * max(float(gains[best]), 0.0)
    wl = nl[best] / n_obs
    wr = nr[best] / n_obs
    split_info = float(-(wl * np.log2(wl) + wr * np.log2(wr)))
    return gain, split_info, threshold


def attribute_scores(ds: Dataset, target: str) -> list[AttributeScore]:
    """Gain-ratio ranking of every non-target attribute against the target.

    Rows with a missing attribute value are excluded from that attribute's
    computation and the gain is scaled by the observed fraction; numeric
    attributes take their best midpoint-threshold gain.  Sorted by
    gain_ratio descending, ties in schema order.
    """
    frame = _Frame(ds, target)
    if not frame.attrs:
        raise SchemaError("need at least one non-target attribute")
    n_universe = len(frame.y)
    scores = []
    for name, kind in frame.attrs:
        if kind is AttributeKind.NUMERIC:
            gain, split_info, thr = _numeric_gain(frame.columns[name], frame.y,
                                                  frame.n_classes, n_universe)
        else:
            gain, split_info = _nominal_gain(frame.columns[name], frame.y,
                                             frame.n_classes, n_universe)
            thr = None
        ratio = gain / split_info if split_info > 0 else 0.0
        scores.append(AttributeScore(name, gain, split_info, ratio, thr))
    return sorted(scores, key=lambda s: -s.gain_ratio)


# ---------------------------------------------------------------------------
# C4.5-style decision tree


@dataclass(frozen=True)
class Leaf:
    label: str
    support: int
    purity: float
    errors: int


@dataclass(frozen=True)
class Split:
    attribute: str
    threshold: float | None                 # None for nominal splits
    keys: tuple[str, ...]                   # "le"/"gt" or nominal labels
    children: tuple          # Leaf | Split per key
    default: int                            # branch index for missing/unseen values


@dataclass(frozen=True)
class DecisionTree:
    root: Leaf | Split
    target: str
    classes: tuple[str, ...]


def _normal_upper_quantile(p: float) -> float:
    """Inverse standard normal CDF (Acklam's rational approximation)."""
    if not 0.0 < p < 1.0:
        raise DataError("quantile probability must be in (0, 1)")
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    if p > 1 - plow:
        q = math.sqrt(-2 * math.log(1 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)


def _pessimistic_errors(n: int, e: int, z: float) -> float:
    """Upper binomial confidence bound on the error count of a leaf."""
    if n == 0:
        return 0.0
    f = e / n
    z2 = z * z
    center = f + z2 / (2 * n)
    rad = z * math.sqrt(f * (1 - f) / n + z2 / (4 * n * n))
    return n * (center + rad) / (1 + z2 / n)


def _leaves(node):
    if isinstance(node, Leaf):
        yield node
    else:
        for child in node.children:
            yield from _leaves(child)


def c45_build(ds: Dataset, target: str, min_leaf: int = DEFAULT_MIN_LEAF,
              min_gain: float = DEFAULT_MIN_GAIN,
              prune_confidence: float = DEFAULT_PRUNE_CONFIDENCE) -> DecisionTree:
    """Top-down induction on gain ratio with pessimistic-error pruning.

    Splits stop at pure nodes, nodes smaller than 2*min_leaf, or when no
    attribute reaches min_gain.  Numeric attributes may be re-tested with
    new thresholds deeper in the tree; nominal attributes are consumed by
    their split.  Missing values follow the largest observed branch.
    """
    if min_leaf < 1:
        raise DataError("min_leaf must be >= 1")
    frame = _Frame(ds, target)
    z = _normal_upper_quantile(1.0 - prune_confidence)
    n_classes = frame.n_classes

    def leaf_for(idx: np.ndarray) -> Leaf:
        counts = np.bincount(frame.y[idx], minlength=n_classes)
        major = int(np.argmax(counts))
        n = len(idx)
        return Leaf(frame.classes[major], n, counts[major] / n, int(n - counts[major]))

    def build(idx: np.ndarray, nominal_left: frozenset) -> Leaf | Split:
        counts = np.bincount(frame.y[idx], minlength=n_classes)
        n = len(idx)
        if counts.max() == n or n < 2 * min_leaf:
            return leaf_for(idx)

        best = None  # (ratio, name, kind, threshold, gain)
        for name, kind in frame.attrs:
            col = frame.columns[name][idx]
            if kind is AttributeKind.NUMERIC:
                gain, split_info, thr = _numeric_gain(col, frame.y[idx], n_classes, n)
            else:
                if name not in nominal_left:
                    continue
                gain, split_info = _nominal_gain(col, frame.y[idx], n_classes, n)
                thr = None
            if gain < min_gain or split_info <= 0:
                continue
            ratio = gain / split_info
            if best is None or ratio > best[0]:
                best = (ratio, name, kind, thr, gain)
        if best is None:
            return leaf_for(idx)

        _, name, kind, thr, _ = best
        col = frame.columns[name][idx]
        if kind is AttributeKind.NUMERIC:
            obs = ~np.isnan(col)
            le = obs & (col <= thr)
            gt = obs & (col > thr)
            parts = [idx[le], idx[gt]]
            keys = ("le", "gt")
            child_nominal = nominal_left
        else:
            obs_codes = col[col >= 0]
            labels = [int(v) for v in np.unique(obs_codes)]
            parts = [idx[col == lab] for lab in labels]
            keys = tuple(frame.ds.categories(name)[lab] for lab in labels)
            obs = col >= 0
            child_nominal = nominal_left - {name}
        sizes = [len(p) for p in parts]
        default = int(np.argmax(sizes))
        missing_idx = idx[~obs]
        if len(missing_idx) > 0:
            parts[default] = np.sort(np.concatenate([parts[default], missing_idx]))

        children = tuple(build(p, child_nominal) for p in parts)
        node = Split(name, thr, tuple(keys), children, default)
        as_leaf = leaf_for(idx)
        subtree_pess = sum(_pessimistic_errors(l.support, l.errors, z) for l in _leaves(node))
        leaf_pess = _pessimistic_errors(as_leaf.support, as_leaf.errors, z)
        if leaf_pess <= subtree_pess:
            return as_leaf
        return node

    idx0 = np.arange(len(frame.y))
    nominal0 = frozenset(n for n, k in frame.attrs if k is AttributeKind.NOMINAL)
    root = build(idx0, nominal0)
    return DecisionTree(root, target, frame.classes)


def tree_predict(tree: DecisionTree, ds: Dataset, row: int) -> str:
    node = tree.root
    while isinstance(node, Split):
        v = ds.value(row, node.attribute)
        if node.threshold is not None:
            if v is None:
                branch = node.default
            else:
                branch = 0 if v <= node.threshold else 1
        else:
            branch = node.default
            if v is not None:
                for i, key in enumerate(node.keys):
                    if key == v:
                        branch = i
                        break
        node = node.children[branch]
    return node.label


def tree_predict_all(tree: DecisionTree, ds: Dataset) -> list[str]:
    return [tree_predict(tree, ds, i) for i in range(ds.n_rows)]


# ---------------------------------------------------------------------------
# Rules


@dataclass(frozen=True)
class NominalCondition:
    attribute: str
    label: str


@dataclass(frozen=True)
class NumericCondition:
    attribute: str
    lo: float | None  # exclusive; None = unbounded
    hi: float | None  # inclusive; None = unbounded


@dataclass(frozen=True)
class Rule:
    antecedent: tuple
    consequent: str
    coverage: int
    accuracy: float


def condition_matches(cond, ds: Dataset, row: int) -> bool:
    v = ds.value(row, cond.attribute)
    if v is None:
        return False
    if isinstance(cond, NominalCondition):
        return v == cond.label
    if cond.lo is not None and not v > cond.lo:
        return False
    if cond.hi is not None and not v <= cond.hi:
        return False
    return True


def rule_matches(rule: Rule, ds: Dataset, row: int) -> bool:
    return all(condition_matches(c, ds, row) for c in rule.antecedent)


def condition_mask(cond, ds: Dataset) -> np.ndarray:
    """Vector of per-row matches; missing cells never match."""
    if isinstance(cond, NominalCondition):
        codes = ds.nominal_codes(cond.attribute)
        cats = ds.categories(cond.attribute)
        if cond.label not in cats:
            return np.zeros(ds.n_rows, dtype=bool)
        return codes == cats.index(cond.label)
    col = ds.numeric_column(cond.attribute)
    mask = ~np.isnan(col)
    if cond.lo is not None:
        mask &= col > cond.lo
    if cond.hi is not None:
        mask &= col <= cond.hi
    return mask


def rule_mask(rule_or_conditions, ds: Dataset) -> np.ndarray:
    conditions = getattr(rule_or_conditions, "antecedent", rule_or_conditions)
    mask = np.ones(ds.n_rows, dtype=bool)
    for cond in conditions:
        mask &= condition_mask(cond, ds)
    return mask


def _label_eq_mask(ds: Dataset, attr: str, label: str) -> np.ndarray:
    cats = ds.categories(attr)
    if label not in cats:
        return np.zeros(ds.n_rows, dtype=bool)
    return ds.nominal_codes(attr) == cats.index(label)


def _measure(antecedent, consequent, ds: Dataset, target: str) -> tuple[int, float]:
    mask = rule_mask(antecedent, ds)
    covered = int(mask.sum())
    if covered == 0:
        return 0, 0.0
    correct = int((mask & _label_eq_mask(ds, target, consequent)).sum())
    return covered, correct / covered


def tree_to_rules(tree: DecisionTree, ds: Dataset) -> list[Rule]:
    """One rule per leaf, numeric path conditions merged into one interval
    per attribute; coverage and accuracy measured against ds; sorted by
    coverage descending (stable)."""
    rules = []

    def walk(node, num_bounds: dict, nom: dict):
        if isinstance(node, Leaf):
            antecedent = []
            for name, _ in ds.schema.attributes:
                if name in nom:
                    antecedent.append(NominalCondition(name, nom[name]))
                elif name in num_bounds:
                    lo, hi = num_bounds[name]
                    antecedent.append(NumericCondition(name, lo, hi))
            coverage, accuracy = _measure(antecedent, node.label, ds, tree.target)
            rules.append(Rule(tuple(antecedent), node.label, coverage, accuracy))
            return
        for i, key in enumerate(node.keys):
            if node.threshold is not None:
                lo, hi = num_bounds.get(node.attribute, (None, None))
                if key == "le":
                    hi = node.threshold if hi is None else min(hi, node.threshold)
                else:
                    lo = node.threshold if lo is None else max(lo, node.threshold)
                walk(node.children[i], {**num_bounds, node.attribute: (lo, hi)}, nom)
            else:
                walk(node.children[i], num_bounds, {**nom, node.attribute: key})

    walk(tree.root, {}, {})
    return sorted(rules, key=lambda r: -r.coverage)


# ---------------------------------------------------------------------------
# PRISM covering rules


def prism_build(ds: Dataset, target: str) -> list[Rule]:
    """Classic separate-and-conquer covering.

    For each class value (first-occurrence order) the instance pool resets
    to the full training set; rules grow one attribute=value condition at a
    time, taking the condition with the best accuracy (ties: larger
    coverage, then schema order), until perfect on the remaining pool or no
    condition strictly improves.  Covered rows leave the pool after each
    rule.  Reported coverage/accuracy are measured against the full
    dataset.
    """
    for name, kind in ds.schema.attributes:
        if name != target and kind is AttributeKind.NUMERIC:
            raise DataError(
                f"PRISM needs nominal attributes; discretize {name!r} first")
    frame = _Frame(ds, target)
    n = len(frame.y)
    rules: list[Rule] = []

    for cls_code, cls in enumerate(frame.classes):
        if not (frame.y == cls_code).any():
            continue
        pool = np.arange(n)
        while True:
            is_cls = frame.y[pool] == cls_code
            if not is_cls.any():
                break
            covered = pool
            conditions: list[NominalCondition] = []
            used: set[str] = set()
            while True:
                correct = int((frame.y[covered] == cls_code).sum())
                if correct == len(covered):
                    break
                cur_acc = correct / len(covered)
                best = None  # (acc, cover, name, code)
                for name, kind in frame.attrs:
                    if name in used:
                        continue
                    col = frame.columns[name][covered]
                    for code in range(len(frame.ds.categories(name))):
                        sub = covered[col == code]
                        if len(sub) == 0:
                            continue
                        p = int((frame.y[sub] == cls_code).sum())
                        acc = p / len(sub)
                        if best is None or acc > best[0] or \
                                (acc == best[0] and len(sub) > best[1]):
                            best = (acc, len(sub), name, code)
                if best is None or best[0] <= cur_acc:
                    break
                _, _, name, code = best
                conditions.append(NominalCondition(name, frame.ds.categories(name)[code]))
                used.add(name)
                covered = covered[frame.columns[name][covered] == code]
            coverage, accuracy = _measure(conditions, cls, ds, target)
            rules.append(Rule(tuple(conditions), cls, coverage, accuracy))
            pool = np.setdiff1d(pool, covered)
    return rules


def rules_predict(rules: Sequence[Rule], ds: Dataset, row: int, default: str) -> str:
    """First matching rule in list order; fall back to the default label."""
    for rule in rules:
        if rule_matches(rule, ds, row):
            return rule.consequent
    return default


def rules_predict_all(rules: Sequence[Rule], ds: Dataset, default: str) -> list[str]:
    """Vectorized first-match prediction for every row."""
    out = [default] * ds.n_rows
    unassigned = np.ones(ds.n_rows, dtype=bool)
    for rule in rules:
        if not unassigned.any():
            break
        hit = rule_mask(rule, ds) & unassigned
        for i in np.nonzero(hit)[0]:
            out[int(i)] = rule.consequent
        unassigned &= ~hit
    return out


# ---------------------------------------------------------------------------
# Naive Bayes


@dataclass(frozen=True)
class BayesModel:
    classes: tuple[str, ...]
    priors: np.ndarray                     # (C,)
    tables: dict                           # attr -> (labels, probs (C,V), class_obs (C,))


def nb_train(ds: Dataset, target: str) -> BayesModel:
    """Laplace-smoothed (add-1) frequency tables over nominal attributes."""
    for name, kind in ds.schema.attributes:
        if name != target and kind is AttributeKind.NUMERIC:
            raise DataError(
                f"naive Bayes needs nominal attributes; discretize {name!r} first")
    frame = _Frame(ds, target)
    n = len(frame.y)
    n_classes = frame.n_classes
    priors = np.bincount(frame.y, minlength=n_classes) / n
    tables = {}
    for name, _ in frame.attrs:
        codes = frame.columns[name]
        labels = frame.ds.categories(name)
        v = len(labels)
        if v == 0:
            continue
        obs = codes >= 0
        counts = np.zeros((n_classes, v), dtype=np.float64)
        for c, lab in zip(frame.y[obs], codes[obs]):
            counts[c, lab] += 1.0
        class_obs = counts.sum(axis=1)
        probs = (counts + 1.0) / (class_obs[:, None] + v)
        tables[name] = (labels, probs, class_obs)
    return BayesModel(frame.classes, priors, tables)


def nb_predict(model: BayesModel, ds: Dataset, row: int) -> tuple[str, float]:
    """Argmax of prior times conditionals; missing attributes are skipped,
    unseen labels get their smoothed nonzero mass.  Returns the winning
    label and its normalized posterior."""
    scores = model.priors.copy()
    for name, (labels, probs, class_obs) in model.tables.items():
        if name not in ds.schema:
            continue
        v = ds.value(row, name)
        if v is None:
            continue
        try:
            j = labels.index(v)
        except ValueError:
            scores = scores * (1.0 / (class_obs + len(labels)))
            continue
        scores = scores * probs[:, j]
    total = scores.sum()
    posterior = scores / total
    best = int(np.argmax(posterior))
    return model.classes[best], float(posterior[best])
