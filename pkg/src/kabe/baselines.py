"""Regression comparators: OLS, forward stepwise regression and a CART tree.

Linear models work on raw feature values. Categorical features enter as
dummy variables (first training level dropped); skewed, strictly positive
numeric features and a skewed target are log transformed when
``transform="auto"``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .corpus import Dataset, FeatureKind, Project, check_mask, skewness

SKEW_THRESHOLD = 1.0


class SingularDesignError(ValueError):
    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        super().__init__(f"singular design matrix; collinear columns: {', '.join(self.columns)}")


@dataclass(frozen=True)
class Term:
    feature: int
    label: str
    level: str | None = None  # dummy variables only
    log: bool = False

    def column(self, projects: Sequence[Project]) -> np.ndarray:
        if self.level is not None:
            return np.array([p.features[self.feature] == self.level for p in projects], dtype=float)
        v = np.array([float(p.features[self.feature]) for p in projects])
        if self.log:
            # Unseen non-positive values cannot be logged; treat as the smallest positive unit.
            return np.log(np.maximum(v, np.finfo(float).tiny))
        return v


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coefficients: dict[str, float]
    terms: tuple[Term, ...]
    log_target: bool
    r_squared: float
    effort_name: str = "Effort"
    floor: float = 0.0
    selected: tuple[int, ...] = ()
    dropped: tuple[str, ...] = field(default=(), compare=False)

    @property
    def log_features(self) -> dict[str, bool]:
        return {t.label: t.log for t in self.terms if t.level is None}

    def formula(self) -> str:
        """Textual form, e.g. ``Ln(Effort) = 4.4 + 0.97 x Ln(AdjFP) - 1.34 x L1``."""
        lhs = f"Ln({self.effort_name})" if self.log_target else self.effort_name
        parts = [f"{self.intercept:.4g}"]
        for t in self.terms:
            c = self.coefficients[t.label]
            name = f"Ln({t.label})" if t.log else t.label
            parts.append(f"{'-' if c < 0 else '+'} {abs(c):.4g} × {name}")
        return f"{lhs} = {' '.join(parts)}"

    def linear_predictor(self, x: Project) -> float:
        return self.intercept + sum(self.coefficients[t.label] * t.column([x])[0] for t in self.terms)


def _build_terms(train: Dataset, mask: Sequence[int], transform: str) -> list[Term]:
    if transform not in ("auto", "none", "log"):
        raise ValueError(f"unknown transform {transform!r}")
    terms = []
    for j in mask:
        fs = train.features[j]
        col = [p.features[j] for p in train.projects]
        if fs.kind is FeatureKind.CATEGORICAL:
            for lv in sorted(set(col))[1:]:
                terms.append(Term(j, f"{fs.name}={lv}", level=lv))
        else:
            v = np.asarray(col, dtype=float)
            positive = bool(np.all(v > 0))
            log = positive and (transform == "log" or (transform == "auto" and skewness(v) > SKEW_THRESHOLD))
            terms.append(Term(j, fs.name, log=log))
    return terms


def _log_target(train: Dataset, transform: str) -> bool:
    return transform == "log" or (transform == "auto" and skewness(train.efforts) > SKEW_THRESHOLD)


def _drop_constant(train: Dataset, terms: list[Term]) -> tuple[list[Term], list[str]]:
    kept, dropped = [], []
    for t in terms:
        (kept if np.ptp(t.column(train.projects)) > 0 else dropped).append(t)
    return kept, [t.label for t in dropped]


def _collinear(X: np.ndarray, labels: Sequence[str]) -> list[str]:
    bad, rank = [], np.linalg.matrix_rank(X[:, :1])
    cols = [0]
    for c in range(1, X.shape[1]):
        r = np.linalg.matrix_rank(X[:, cols + [c]])
        if r > rank:
            cols.append(c)
            rank = r
        else:
            bad.append(labels[c])
    return bad


def _lstsq(train: Dataset, terms: Sequence[Term], log_target: bool):
    y = np.log(train.efforts) if log_target else train.efforts
    X = np.column_stack([np.ones(len(train))] + [t.column(train.projects) for t in terms])
    if len(terms) and np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesignError(_collinear(X, ["(intercept)"] + [t.label for t in terms]))
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, float(resid @ resid), y


def _fit_terms(train: Dataset, terms: list[Term], log_target: bool, selected=(), dropped=()) -> LinearModel:
    n = len(train)
    if n <= len(terms):
        raise ValueError(f"{n} training projects cannot fit {len(terms)} regressors")
    beta, sse, y = _lstsq(train, terms, log_target)
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0:
        beta = np.zeros(len(terms) + 1)
        beta[0] = y.mean()
        r2 = 0.0
    else:
        r2 = float(min(1.0, max(0.0, 1.0 - sse / sst)))
    return LinearModel(
        intercept=float(beta[0]),
        coefficients={t.label: float(b) for t, b in zip(terms, beta[1:])},
        terms=tuple(terms),
        log_target=log_target,
        r_squared=r2,
        effort_name=train.effort_column,
        floor=float(train.efforts.min()),
        selected=tuple(selected),
        dropped=tuple(dropped),
    )


def fit_ols(train: Dataset, mask: Sequence[int] | None = None, transform: str = "auto") -> LinearModel:
    """Least squares on every feature of ``mask``.

    ``transform`` is ``"auto"`` (log the target and the strictly positive
    numeric features whose skewness exceeds 1), ``"log"`` (log every strictly
    positive numeric feature and the target) or ``"none"``. Columns constant on
    the training fold are inestimable and dropped (listed in ``dropped``);
    any remaining collinearity raises :class:`SingularDesignError`.
    """
    mask = check_mask(train.full_mask() if mask is None else mask, len(train.features))
    terms, dropped = _drop_constant(train, _build_terms(train, mask, transform))
    return _fit_terms(train, terms, _log_target(train, transform), selected=mask, dropped=dropped)


def fit_stepwise(train: Dataset, mask: Sequence[int] | None = None, transform: str = "auto", alpha: float = 0.05) -> LinearModel:
    """Forward selection by partial-F p-value.

    Starting from the intercept-only model, repeatedly add the feature (all of
    its dummies at once for a categorical feature) with the smallest partial-F
    p-value below ``alpha``; stop when none qualifies.
    """
    mask = check_mask(train.full_mask() if mask is None else mask, len(train.features))
    log_target = _log_target(train, transform)
    groups = {}
    for j in mask:
        kept, _ = _drop_constant(train, _build_terms(train, [j], transform))
        if kept:
            groups[j] = kept
    n = len(train)
    chosen: list[int] = []
    current: list[Term] = []
    _, sse_cur, _ = _lstsq(train, current, log_target)
    while True:
        best = None
        for j in sorted(set(groups) - set(chosen)):
            trial = current + groups[j]
            df_resid = n - len(trial) - 1
            if df_resid <= 0:
                continue
            try:
                _, sse_new, _ = _lstsq(train, trial, log_target)
            except SingularDesignError:
                continue
            df_num = len(groups[j])
            if sse_new <= 0:
                p = 0.0 if sse_cur > 0 else 1.0
            else:
                F = max(0.0, (sse_cur - sse_new) / df_num) / (sse_new / df_resid)
                p = float(stats.f.sf(F, df_num, df_resid))
            if p < alpha and (best is None or p < best[0]):
                best = (p, j, sse_new)
        if best is None:
            break
        chosen.append(best[1])
        current = current + groups[best[1]]
        sse_cur = best[2]
    chosen_sorted = sorted(chosen)
    terms = [t for j in chosen_sorted for t in groups[j]]
    return _fit_terms(train, terms, log_target, selected=tuple(chosen_sorted))


@dataclass(eq=False)
class TreeNode:
    value: float
    n: int
    feature: int | None = None
    threshold: float | None = None
    left_levels: frozenset | None = None
    left: TreeNode | None = None
    right: TreeNode | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def goes_left(self, v) -> bool:
        if self.threshold is not None:
            return float(v) <= self.threshold
        return v in self.left_levels

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()


@dataclass(frozen=True)
class TreeModel:
    root: TreeNode
    min_leaf: int
    mask: tuple[int, ...]
    kinds: tuple[FeatureKind, ...]
    floor: float
    #: categorical levels seen in training, per masked feature
    seen: tuple = ()

    def leaf_for(self, x: Project) -> TreeNode:
        node = self.root
        while not node.is_leaf:
            v = x.features[node.feature]
            if node.left_levels is not None and v not in self._seen_at(node.feature):
                node = node.left if node.left.n >= node.right.n else node.right
            else:
                node = node.left if node.goes_left(v) else node.right
        return node

    def _seen_at(self, feature: int):
        return self.seen[self.mask.index(feature)]


@dataclass(frozen=True)
class Split:
    feature: int
    reduction: float
    threshold: float | None = None
    left_levels: frozenset | None = None


def _sse(y: np.ndarray) -> float:
    return float(((y - y.mean()) ** 2).sum()) if y.size else 0.0


def _numeric_splits(v: np.ndarray, y: np.ndarray, min_leaf: int):
    """Yield (threshold, SSE reduction) for midpoints between sorted unique values."""
    order = np.argsort(v, kind="stable")
    vs, ys = v[order], y[order]
    n = len(ys)
    cs, cs2 = np.cumsum(ys), np.cumsum(ys**2)
    total = _sse(ys)
    for i in range(min_leaf - 1, n - min_leaf):
        if vs[i] == vs[i + 1]:
            continue
        nl, nr = i + 1, n - i - 1
        sl, sr = cs[i], cs[-1] - cs[i]
        sse_l = cs2[i] - sl**2 / nl
        sse_r = (cs2[-1] - cs2[i]) - sr**2 / nr
        yield (vs[i] + vs[i + 1]) / 2.0, total - sse_l - sse_r


def _level_subsets(levels: Sequence[str]):
    if len(levels) <= 10:
        first, rest = levels[0], levels[1:]
        for r in range(0, len(rest)):
            for combo in itertools.combinations(rest, r):
                yield frozenset((first, *combo))
    else:
        for lv in levels:
            yield frozenset([lv])


def best_split(projects: Sequence[Project], y: np.ndarray, mask, kinds, min_leaf: int) -> Split | None:
    """Highest variance-reduction split with both sides >= ``min_leaf``.

    Ties keep the first candidate (mask order, ascending threshold).
    """
    best = None
    total = _sse(y)
    # Improvements below rounding noise do not displace an earlier candidate.
    tol = 1e-9 * max(1.0, total)
    for j, kind in zip(mask, kinds):
        col = [p.features[j] for p in projects]
        if kind is FeatureKind.NUMERIC:
            for thr, red in _numeric_splits(np.asarray(col, dtype=float), y, min_leaf):
                if best is None or red > best.reduction + tol:
                    best = Split(j, float(red), threshold=float(thr))
        else:
            col = np.asarray(col, dtype=object)
            for subset in _level_subsets(sorted(set(col.tolist()))):
                left = np.array([v in subset for v in col])
                nl = int(left.sum())
                if nl < min_leaf or len(y) - nl < min_leaf:
                    continue
                red = total - _sse(y[left]) - _sse(y[~left])
                if best is None or red > best.reduction + tol:
                    best = Split(j, float(red), left_levels=subset)
    return best


def _grow(projects, y, mask, kinds, min_leaf) -> TreeNode:
    node = TreeNode(float(y.mean()), len(y))
    if len(y) < 2 * min_leaf:
        return node
    split = best_split(projects, y, mask, kinds, min_leaf)
    if split is None or split.reduction <= 1e-12 * max(1.0, _sse(y)):
        return node
    node.feature = split.feature
    node.threshold = split.threshold
    node.left_levels = split.left_levels
    left = np.array([node.goes_left(p.features[split.feature]) for p in projects])
    node.left = _grow([p for p, l in zip(projects, left) if l], y[left], mask, kinds, min_leaf)
    node.right = _grow([p for p, l in zip(projects, left) if not l], y[~left], mask, kinds, min_leaf)
    return node


def fit_cart(train: Dataset, mask: Sequence[int] | None = None, min_leaf: int = 5) -> TreeModel:
    """Greedy regression tree maximizing variance reduction of effort.

    Numeric splits sit at midpoints of sorted unique values; categorical
    splits try every level subset (one-vs-rest beyond 10 levels). Growth stops
    when a node cannot yield two children of ``min_leaf`` projects or no split
    reduces the squared error.
    """
    mask = check_mask(train.full_mask() if mask is None else mask, len(train.features))
    if len(train) < 2 * min_leaf:
        raise ValueError(f"CART needs at least {2 * min_leaf} training projects, got {len(train)}")
    kinds = tuple(train.features[j].kind for j in mask)
    seen = tuple(
        frozenset(p.features[j] for p in train.projects) if k is FeatureKind.CATEGORICAL else None
        for j, k in zip(mask, kinds)
    )
    root = _grow(list(train.projects), train.efforts, mask, kinds, min_leaf)
    return TreeModel(root, min_leaf, mask, kinds, float(train.efforts.min()), seen)


def predict_raw(model: LinearModel | TreeModel, x: Project) -> float:
    if isinstance(model, TreeModel):
        return model.leaf_for(x).value
    eta = model.linear_predictor(x)
    if model.log_target:
        return math.exp(min(eta, 700.0))
    return eta


def predict(model: LinearModel | TreeModel, x: Project) -> float:
    """Effort estimate on the original scale, never below the smallest training effort."""
    return max(predict_raw(model, x), model.floor)
