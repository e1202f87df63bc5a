"""Leave-one-out evaluation, accuracy measures and method tournaments."""

from __future__ import annotations

import itertools
import math
import statistics
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .corpus import Dataset, Project

MEASURES = ("mmre", "mdmre", "pred25")
_HIGHER_IS_BETTER = {"mmre": False, "mdmre": False, "pred25": True}
EXACT_LIMIT = 12


class FoldError(RuntimeError):
    """A method failed on one leave-one-out fold; the run is aborted."""

    def __init__(self, method: str, dataset: str, fold: int, project_id: str, cause: BaseException):
        self.method, self.dataset, self.fold, self.project_id = method, dataset, fold, project_id
        super().__init__(f"{method} on {dataset}, fold {fold} (project {project_id}): {type(cause).__name__}: {cause}")


def mre(actual: float, predicted: float) -> float:
    if not actual > 0:
        raise ValueError("actual effort must be positive")
    return abs(actual - predicted) / actual


def mmre(mres: Sequence[float]) -> float:
    """Mean MRE, correctly rounded (independent of summation order)."""
    if len(mres) == 0:
        raise ValueError("no MRE values")
    return float(statistics.mean(float(v) for v in mres))


def mdmre(mres: Sequence[float]) -> float:
    if len(mres) == 0:
        raise ValueError("no MRE values")
    return float(statistics.median(float(v) for v in mres))


def pred_at(mres: Sequence[float], threshold: float = 0.25) -> float:
    """Percentage of MREs at or below ``threshold``."""
    if len(mres) == 0:
        raise ValueError("no MRE values")
    m = np.asarray(mres, dtype=float)
    return 100.0 * float(np.count_nonzero(m <= threshold)) / m.size


@dataclass(frozen=True)
class FoldResult:
    project_id: str
    actual: float
    predicted: float
    analogy_size: int | None = None
    flags: tuple[str, ...] = ()

    @property
    def residual(self) -> float:
        return abs(self.actual - self.predicted)

    @property
    def mre(self) -> float:
        return mre(self.actual, self.predicted)


@dataclass(frozen=True)
class EvaluationSummary:
    method: str
    dataset: str
    folds: tuple[FoldResult, ...]
    mmre: float = field(init=False)
    mdmre: float = field(init=False)
    pred25: float = field(init=False)

    def __post_init__(self):
        m = self.mres
        object.__setattr__(self, "mmre", mmre(m))
        object.__setattr__(self, "mdmre", mdmre(m))
        object.__setattr__(self, "pred25", pred_at(m))

    @property
    def mres(self) -> np.ndarray:
        return np.array([f.mre for f in self.folds])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([f.residual for f in self.folds])

    @property
    def analogy_sizes(self) -> list[int]:
        return [f.analogy_size for f in self.folds if f.analogy_size is not None]

    def measure(self, name: str) -> float:
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "mmre": self.mmre,
            "mdmre": self.mdmre,
            "pred25": self.pred25,
            "folds": [
                {
                    "project_id": f.project_id,
                    "actual": f.actual,
                    "predicted": f.predicted,
                    "analogy_size": f.analogy_size,
                    "flags": list(f.flags),
                }
                for f in self.folds
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvaluationSummary:
        folds = tuple(
            FoldResult(f["project_id"], f["actual"], f["predicted"], f.get("analogy_size"), tuple(f.get("flags", ())))
            for f in d["folds"]
        )
        return cls(d["method"], d["dataset"], folds)


def fold_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def loocv(
    dataset: Dataset,
    method,
    seed: int = 0,
    mask: Sequence[int] | None = None,
    on_fold: Callable[[int, Project, Dataset], None] | None = None,
) -> EvaluationSummary:
    """Predict every project from the remaining ones.

    ``method`` needs a ``name`` and ``fit(train, mask, seed)`` returning an
    object with ``predict(project)``. ``on_fold`` is called with the fold
    index, the held-out project and the training fold before fitting.
    """
    n = len(dataset)
    if n < 3:
        raise ValueError("leave-one-out evaluation needs at least 3 projects")
    seeds = fold_seeds(seed, n)
    folds = []
    for i, test in enumerate(dataset.projects):
        train = dataset.without(i)
        if on_fold is not None:
            on_fold(i, test, train)
        try:
            pred = method.fit(train, mask, seeds[i]).predict(test)
        except Exception as exc:
            raise FoldError(method.name, dataset.name, i, test.id, exc) from exc
        folds.append(FoldResult(test.id, test.effort, pred.value, pred.analogy_size, tuple(pred.flags)))
    return EvaluationSummary(method.name, dataset.name, tuple(folds))


class WilcoxonResult(NamedTuple):
    p_value: float
    significant: bool


def _exact_rank_sum_p(ranks: np.ndarray, n1: int) -> float:
    N = ranks.size
    w = ranks[:n1].sum()
    mu = n1 * (N + 1) / 2.0
    sums = np.fromiter(
        (ranks[list(c)].sum() for c in itertools.combinations(range(N), n1)),
        dtype=float,
        count=math.comb(N, n1),
    )
    return float(np.mean(np.abs(sums - mu) >= abs(w - mu) - 1e-9))


def _approx_rank_sum_p(ranks: np.ndarray, n1: int) -> float:
    N = ranks.size
    n2 = N - n1
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    _, t = np.unique(ranks, return_counts=True)
    var = n1 * n2 / 12.0 * ((N + 1) - float((t**3 - t).sum()) / (N * (N - 1)))
    if var <= 0:
        return 1.0
    z = max(0.0, abs(u - n1 * n2 / 2.0) - 0.5) / math.sqrt(var)
    return float(min(1.0, 2.0 * stats.norm.sf(z)))


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float], confidence: float = 95, method: str = "auto") -> WilcoxonResult:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) test with midranks.

    ``method="auto"`` enumerates the exact permutation distribution when the
    pooled size is at most 12 and otherwise uses the normal approximation
    with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 3 or b.size < 3:
        raise ValueError("each sample needs at least 3 values")
    ranks = stats.rankdata(np.concatenate([a, b]))
    if method == "auto":
        method = "exact" if ranks.size <= EXACT_LIMIT else "approx"
    if method == "exact":
        p = _exact_rank_sum_p(ranks, a.size)
    elif method == "approx":
        p = _approx_rank_sum_p(ranks, a.size)
    else:
        raise ValueError(f"unknown method {method!r}")
    return WilcoxonResult(p, p < 1.0 - confidence / 100.0)


@dataclass
class ComparisonOutcome:
    counts: dict[str, dict[str, int]]
    p_values: dict[tuple[str, str, str], float]

    def row(self, method: str) -> dict:
        c = self.counts[method]
        return {"method": method, **c, "win_minus_loss": c["win"] - c["loss"]}

    def table(self) -> list[dict]:
        """Rows sorted by win - loss (descending), then by method name."""
        rows = [self.row(m) for m in self.counts]
        return sorted(rows, key=lambda r: (-r["win_minus_loss"], r["method"]))


def _better(measure: str, x: float, y: float) -> bool:
    return x > y if _HIGHER_IS_BETTER[measure] else x < y


def win_tie_loss(
    summaries: Sequence[EvaluationSummary],
    measures: Sequence[str] = MEASURES,
    gate: str = "mre",
    confidence: float = 95,
) -> ComparisonOutcome:
    """Pairwise tournament over methods, per dataset.

    For each dataset and pair of methods the Wilcoxon test on the per-project
    MRE vectors (or absolute residuals, ``gate="residual"``) is run once. If
    it finds no difference both methods tie on every measure; otherwise, per
    measure, the better method wins and the other loses.
    """
    by_ds: dict[str, dict[str, EvaluationSummary]] = {}
    for s in summaries:
        if s.method in by_ds.setdefault(s.dataset, {}):
            raise ValueError(f"duplicate summary for {s.method} on {s.dataset}")
        by_ds[s.dataset][s.method] = s
    methods = sorted({s.method for s in summaries})
    for ds, group in by_ds.items():
        if sorted(group) != methods:
            raise ValueError(f"dataset {ds} lacks results for {sorted(set(methods) - set(group))}")
    if len(methods) < 2:
        raise ValueError("a tournament needs at least 2 methods")

    counts = {m: {"win": 0, "tie": 0, "loss": 0} for m in methods}
    pvals = {}
    for ds in sorted(by_ds):
        group = by_ds[ds]
        for mi, mj in itertools.combinations(methods, 2):
            si, sj = group[mi], group[mj]
            vi, vj = (si.mres, sj.mres) if gate == "mre" else (si.residuals, sj.residuals)
            p, significant = wilcoxon_rank_sum(vi, vj, confidence)
            pvals[(ds, mi, mj)] = p
            for e in measures:
                if not significant:
                    counts[mi]["tie"] += 1
                    counts[mj]["tie"] += 1
                elif _better(e, si.measure(e), sj.measure(e)):
                    counts[mi]["win"] += 1
                    counts[mj]["loss"] += 1
                else:
                    counts[mj]["win"] += 1
                    counts[mi]["loss"] += 1
    return ComparisonOutcome(counts, pvals)


@dataclass(frozen=True)
class FssResult:
    best_mask: tuple[int, ...]
    best_mmre: float
    mode: str
    candidates: int
    full_mmre: float


def fss_search(dataset: Dataset, method, seed: int = 0, max_exhaustive: int = 16) -> FssResult:
    """Feature subset minimizing leave-one-out MMRE.

    Exhaustive over all non-empty subsets for up to ``max_exhaustive``
    features, greedy forward selection beyond. Ties prefer the smaller mask,
    then the lexicographically smaller one.
    """
    m = len(dataset.features)
    if m < 1:
        raise ValueError("dataset has no predictor features")
    cache: dict[tuple[int, ...], float] = {}

    def score(mask):
        if mask not in cache:
            cache[mask] = loocv(dataset, method, seed, mask).mmre
        return cache[mask]

    best, best_score = None, math.inf
    if m <= max_exhaustive:
        mode = "exhaustive"
        for r in range(1, m + 1):
            for mask in itertools.combinations(range(m), r):
                s = score(mask)
                if s < best_score:
                    best, best_score = mask, s
        evaluated = len(cache)
    else:
        mode = "forward"
        current: tuple[int, ...] = ()
        while len(current) < m:
            trials = [tuple(sorted(current + (j,))) for j in range(m) if j not in current]
            step_best = min(trials, key=lambda t: (score(t), t))
            if score(step_best) >= best_score:
                break
            best, best_score = step_best, score(step_best)
            current = step_best
        evaluated = len(cache)
    full = tuple(range(m))
    full_mmre = score(full)
    return FssResult(best, best_score, mode, evaluated, full_mmre)


@dataclass(frozen=True)
class BoxplotSummary:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    outliers: tuple[float, ...]


def boxplot_summary(residuals: Sequence[float]) -> BoxplotSummary:
    """Five-number summary with Tukey (1.5 IQR) outliers; linear-interpolated quartiles."""
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise ValueError("no residuals")
    q1, med, q3 = np.percentile(r, [25, 50, 75])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    out = tuple(float(v) for v in r if v < lo or v > hi)
    return BoxplotSummary(float(r.min()), float(q1), float(med), float(q3), float(r.max()), out)
