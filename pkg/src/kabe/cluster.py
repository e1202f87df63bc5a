"""Bisecting k-medoids: divisive clustering with a variance stopping rule.

The tree starts from one cluster holding every point. Level by level, each
cluster is split in two with 2-medoids; the split is kept only when both
children are tighter than their parent (the larger child variance is strictly
below the parent variance) and both children have at least
``min_leaf_size`` members. Otherwise the parent becomes a leaf.

Point indices are positions in the ``points`` array handed to :func:`bisect`.
All ties (nearest medoid, medoid choice) go to the lower index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .corpus import feature_deltas, pairwise_distances


@dataclass(frozen=True)
class BkConfig:
    seed: int = 0
    restarts: int = 5
    min_leaf_size: int = 3
    max_kmedoid_iters: int = 100

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.min_leaf_size < 1:
            raise ValueError("min_leaf_size must be >= 1")
        if self.max_kmedoid_iters < 1:
            raise ValueError("max_kmedoid_iters must be >= 1")


@dataclass(eq=False)
class ClusterNode:
    members: tuple[int, ...]
    medoid: int
    variance: float
    children: tuple[ClusterNode, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def __len__(self) -> int:
        return len(self.members)

    def walk(self) -> Iterator[ClusterNode]:
        yield self
        for c in self.children:
            yield from c.walk()

    def to_dict(self, ids: Sequence | None = None) -> dict:
        name = (lambda i: ids[i]) if ids is not None else (lambda i: i)
        out = {
            "members": [name(i) for i in self.members],
            "medoid": name(self.medoid),
            "variance": self.variance,
        }
        if self.children:
            out["children"] = [c.to_dict(ids) for c in self.children]
        return out


@dataclass(eq=False)
class ClusterTree:
    root: ClusterNode
    seed: int
    _leaf_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for leaf in self.leaves:
            for i in leaf.members:
                self._leaf_index[i] = leaf

    @property
    def leaves(self) -> list[ClusterNode]:
        return [n for n in self.root.walk() if n.is_leaf]

    def to_dict(self, ids: Sequence | None = None) -> dict:
        return {"seed": self.seed, "leaf_count": len(self.leaves), "root": self.root.to_dict(ids)}


def variance(members: Sequence[int], center: int, space: np.ndarray, categorical=None) -> float:
    """Mean squared (unscaled) Euclidean norm from ``center`` over ``members``.

    Categorical mismatches contribute 1 per feature.
    """
    members = np.asarray(members, dtype=int)
    if members.size == 0:
        raise ValueError("variance of an empty cluster")
    if center not in set(members.tolist()):
        raise ValueError(f"center {center} is not a member")
    space = np.asarray(space, dtype=float)
    if space.ndim == 1:
        space = space[:, None]
    d = feature_deltas(space[members], space[center][None, :], categorical)
    return float(np.einsum("ij,ij->i", d, d).mean())


def _medoid(local_D: np.ndarray) -> int:
    # argmin returns the first minimum, i.e. the lowest index.
    return int(np.argmin(local_D.sum(axis=1)))


def _two_medoids(D: np.ndarray, init: tuple[int, int], max_iter: int) -> tuple[np.ndarray, tuple[int, int], float]:
    """Alternating 2-medoids on a local distance matrix.

    Returns (labels, medoids, total dissimilarity) with medoids ordered so the
    first has the lower index.
    """
    n = D.shape[0]
    a, b = sorted(init)
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        labels = (D[:, b] < D[:, a]).astype(int)
        labels[a], labels[b] = 0, 1
        new = []
        for k in (0, 1):
            idx = np.flatnonzero(labels == k)
            new.append(int(idx[_medoid(D[np.ix_(idx, idx)])]))
        na, nb = sorted(new)
        if (na, nb) == (a, b):
            break
        a, b = na, nb
    labels = (D[:, b] < D[:, a]).astype(int)
    labels[a], labels[b] = 0, 1
    cost = float(np.where(labels == 0, D[:, a], D[:, b]).sum())
    return labels, (a, b), cost


def _split(members: np.ndarray, D: np.ndarray, space, categorical, cfg: BkConfig, rng) -> tuple[ClusterNode, ClusterNode]:
    members = np.sort(members)
    k = members.size
    if k < 2:
        raise ValueError("k-medoids split needs at least 2 members")
    local = D[np.ix_(members, members)]
    if k == 2:
        labels = np.array([0, 1])
        meds = (0, 1)
    else:
        best = None
        for _ in range(cfg.restarts):
            init = tuple(int(i) for i in rng.choice(k, size=2, replace=False))
            result = _two_medoids(local, init, cfg.max_kmedoid_iters)
            if best is None or result[2] < best[2]:
                best = result
        labels, meds, _ = best
    children = []
    for lab in (0, 1):
        idx = members[labels == lab]
        med = int(members[meds[lab]])
        children.append(ClusterNode(tuple(int(i) for i in idx), med, variance(idx, med, space, categorical)))
    children.sort(key=lambda c: c.members[0])
    return children[0], children[1]


def _prepare(space, categorical):
    space = np.asarray(space, dtype=float)
    if space.ndim == 1:
        space = space[:, None]
    return space, pairwise_distances(space, categorical)


def kmedoids_split(
    members: Sequence[int],
    space: np.ndarray,
    cfg: BkConfig = BkConfig(),
    categorical=None,
    rng: np.random.Generator | None = None,
) -> tuple[ClusterNode, ClusterNode]:
    """Split ``members`` into two clusters with 2-medoids.

    Runs ``cfg.restarts`` random initializations and keeps the one with the
    lowest total point-to-medoid distance (earliest restart on ties).
    """
    members = np.asarray(members, dtype=int)
    if members.size < 2:
        raise ValueError("k-medoids split needs at least 2 members")
    space, D = _prepare(space, categorical)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    return _split(members, D, space, categorical, cfg, rng)


def bisect(space: np.ndarray, cfg: BkConfig = BkConfig(), categorical=None, indices: Sequence[int] | None = None) -> ClusterTree:
    """Grow the bisecting k-medoids tree over ``indices`` (default: all rows)."""
    space, D = _prepare(space, categorical)
    members = np.arange(space.shape[0]) if indices is None else np.sort(np.asarray(indices, dtype=int))
    if members.size == 0:
        raise ValueError("bisect needs at least one point")
    rng = np.random.default_rng(cfg.seed)
    med = int(members[_medoid(D[np.ix_(members, members)])])
    root = ClusterNode(tuple(int(i) for i in members), med, variance(members, med, space, categorical))

    frontier = [root]
    while frontier:
        next_level = []
        for node in frontier:
            if len(node) < max(2, 2 * cfg.min_leaf_size):
                continue
            c1, c2 = _split(np.asarray(node.members), D, space, categorical, cfg, rng)
            big_enough = min(len(c1), len(c2)) >= cfg.min_leaf_size
            if big_enough and max(c1.variance, c2.variance) < node.variance:
                node.children = (c1, c2)
                next_level += [c1, c2]
        frontier = next_level
    return ClusterTree(root, cfg.seed)


def bisect_scalar(values: Sequence[float], cfg: BkConfig = BkConfig()) -> ClusterTree:
    """Bisecting k-medoids over one-dimensional points."""
    v = np.asarray(values, dtype=float).reshape(-1, 1)
    return bisect(v, cfg)


def leaf_of(tree: ClusterTree, index: int) -> ClusterNode:
    try:
        return tree._leaf_index[int(index)]
    except KeyError:
        raise KeyError(f"index {index} was not clustered") from None
