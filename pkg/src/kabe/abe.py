"""Analogy retrieval: fixed-k nearest neighbours and k-ABE analogy discovery."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cluster import BkConfig, ClusterTree, bisect, bisect_scalar, leaf_of
from .corpus import Dataset, NormalizationModel, Project, distances_to, fit_normalizer, normalize_all


@dataclass(frozen=True)
class CaseBase:
    """A training fold in normalized space, ready for retrieval."""

    points: np.ndarray
    efforts: np.ndarray
    categorical: np.ndarray
    normalizer: NormalizationModel | None = None
    ids: tuple = ()

    @classmethod
    def from_dataset(cls, train: Dataset, mask: Sequence[int] | None = None, nm: NormalizationModel | None = None) -> CaseBase:
        mask = train.full_mask() if mask is None else tuple(mask)
        nm = fit_normalizer(train, mask) if nm is None else nm
        return cls(normalize_all(train.projects, nm), train.efforts, nm.categorical, nm, tuple(train.ids))

    @classmethod
    def from_arrays(cls, points, efforts, categorical=None) -> CaseBase:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        cat = np.zeros(points.shape[1], dtype=bool) if categorical is None else np.asarray(categorical, dtype=bool)
        return cls(points, np.asarray(efforts, dtype=float), cat, None, tuple(range(len(points))))

    def __len__(self) -> int:
        return len(self.efforts)

    @property
    def effort_floor(self) -> float:
        """Smallest training effort; adjusted estimates are clamped to it."""
        return float(self.efforts.min())

    def vector(self, x) -> np.ndarray:
        if isinstance(x, Project):
            if self.normalizer is None:
                raise ValueError("case base has no normalizer; pass a normalized vector")
            return self.normalizer.transform(x)
        return np.asarray(x, dtype=float).reshape(-1)

    def distances(self, x) -> np.ndarray:
        return distances_to(self.points, self.vector(x), self.categorical)


@dataclass(frozen=True)
class Neighbor:
    index: int
    distance: float
    similarity: float


@dataclass(frozen=True)
class AnalogySet:
    members: tuple[Neighbor, ...]
    source: str

    def __post_init__(self):
        if not self.members:
            raise ValueError("an analogy set cannot be empty")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def indices(self) -> list[int]:
        return [nb.index for nb in self.members]

    @property
    def similarities(self) -> np.ndarray:
        return np.array([nb.similarity for nb in self.members])


def _rank(dist: np.ndarray, candidates: np.ndarray) -> list[Neighbor]:
    d = dist[candidates]
    order = np.lexsort((candidates, d))
    top = d.max()
    sims = np.ones_like(d) if top == 0 else 1.0 - d / top
    return [Neighbor(int(candidates[o]), float(d[o]), float(sims[o])) for o in order]


def _candidates(n: int, exclude) -> np.ndarray:
    idx = np.arange(n)
    if exclude is None:
        return idx
    return idx[idx != exclude]


def rank_neighbors(x, cases: CaseBase, exclude: int | None = None) -> list[Neighbor]:
    """All training projects by ascending distance to ``x`` (ties: lower index).

    Similarity is ``1 - d / d_max`` with ``d_max`` the largest distance from
    ``x`` to any candidate, so the farthest project scores 0. ``exclude``
    removes one training index from consideration.
    """
    cand = _candidates(len(cases), exclude)
    if cand.size == 0:
        raise ValueError("no training projects to rank")
    return _rank(cases.distances(x), cand)


def fixed_k_select(ranked: Sequence[Neighbor], k: int) -> AnalogySet:
    if not 1 <= k <= len(ranked):
        raise ValueError(f"k={k} outside 1..{len(ranked)}")
    return AnalogySet(tuple(ranked[:k]), "fixed-k")


def _kabe_from_ranked(ranked: list[Neighbor], tree: ClusterTree, cfg: BkConfig) -> AnalogySet:
    y = ranked[0].index
    feature_leaf = set(leaf_of(tree, y).members)
    # Distance-space clustering over every candidate; position 0 is y.
    dtree = bisect_scalar([nb.distance for nb in ranked], cfg)
    nearest_leaf = {ranked[pos].index for pos in leaf_of(dtree, 0).members}
    chosen = tuple(nb for nb in ranked if nb.index in feature_leaf and nb.index in nearest_leaf)
    return AnalogySet(chosen, "kabe")


def kabe_select(
    x,
    cases: CaseBase,
    cfg: BkConfig = BkConfig(),
    tree: ClusterTree | None = None,
    exclude: int | None = None,
) -> AnalogySet:
    """Discover the analogy set of ``x`` with bisecting k-medoids.

    1. cluster the training projects in feature space (or reuse ``tree``);
    2. rank every training project by distance to ``x``;
    3. take the nearest one, ``y``, and the feature-space leaf holding it;
    4. cluster the distance values themselves and take the leaf holding
       ``y``'s distance;
    5. return the intersection of both leaves, ordered by distance.
    """
    if len(cases) - (exclude is not None) < 2:
        raise ValueError("k-ABE needs at least 2 training projects")
    if tree is None:
        tree = bisect(cases.points, cfg, cases.categorical, indices=_candidates(len(cases), exclude))
    return _kabe_from_ranked(rank_neighbors(x, cases, exclude), tree, cfg)


def estimate_mean(analogies: AnalogySet, cases: CaseBase | Sequence[float]) -> float:
    efforts = cases.efforts if isinstance(cases, CaseBase) else np.asarray(cases, dtype=float)
    return float(np.mean(efforts[analogies.indices]))


def analogy_size_histogram(sizes: Sequence[int]) -> dict[int, int]:
    if len(sizes) == 0:
        raise ValueError("no analogy-set sizes given")
    return dict(sorted(Counter(int(s) for s in sizes).items()))


class FittedSelector:
    def select(self, x, exclude: int | None = None) -> AnalogySet:
        raise NotImplementedError


@dataclass(frozen=True)
class FixedK:
    """Selector returning the ``k`` nearest analogies."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def name(self) -> str:
        return f"abe-{self.k}"

    def fit(self, cases: CaseBase) -> _FittedFixedK:
        return _FittedFixedK(self.k, cases)


@dataclass(frozen=True)
class _FittedFixedK(FittedSelector):
    k: int
    cases: CaseBase

    def select(self, x, exclude=None):
        ranked = rank_neighbors(x, self.cases, exclude)
        return fixed_k_select(ranked, min(self.k, len(ranked)))


@dataclass(frozen=True)
class Kabe:
    """Selector discovering a per-project analogy set (k-ABE)."""

    cfg: BkConfig = BkConfig()
    name = "kabe"

    def fit(self, cases: CaseBase) -> _FittedKabe:
        if len(cases) < 2:
            raise ValueError("k-ABE needs at least 2 training projects")
        return _FittedKabe(self.cfg, cases, bisect(cases.points, self.cfg, cases.categorical))


@dataclass(frozen=True)
class _FittedKabe(FittedSelector):
    cfg: BkConfig
    cases: CaseBase
    tree: ClusterTree

    def select(self, x, exclude=None):
        # With ``exclude`` the feature tree still contains the excluded
        # project; it just never appears among the candidates.
        ranked = rank_neighbors(x, self.cases, exclude)
        return _kabe_from_ranked(ranked, self.tree, self.cfg)
