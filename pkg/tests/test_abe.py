import numpy as np
import pytest

from kabe.abe import (
    AnalogySet,
    CaseBase,
    FixedK,
    Kabe,
    analogy_size_histogram,
    estimate_mean,
    fixed_k_select,
    kabe_select,
    rank_neighbors,
)
from kabe.cluster import BkConfig, ClusterNode, ClusterTree, bisect, leaf_of


def test_rank_order_and_duplicate():
    cases = CaseBase.from_arrays([0.1, 0.5, 0.9], [1, 2, 3])
    ranked = rank_neighbors([0.0], cases)
    assert [nb.index for nb in ranked] == [0, 1, 2]
    dup = rank_neighbors([0.5], cases)
    assert dup[0].index == 1 and dup[0].distance == 0.0 and dup[0].similarity == 1.0
    assert dup[-1].similarity == 0.0


def test_rank_ties_prefer_lower_index():
    cases = CaseBase.from_arrays([0.6, 0.4, 0.6], [1, 2, 3])
    assert [nb.index for nb in rank_neighbors([0.5], cases)] == [0, 1, 2]


def test_rank_exclude():
    cases = CaseBase.from_arrays([0.1, 0.5, 0.9], [1, 2, 3])
    assert [nb.index for nb in rank_neighbors([0.1], cases, exclude=0)] == [1, 2]


def test_fixed_k_select():
    cases = CaseBase.from_arrays([0.3, 0.1, 0.5, 0.9, 0.7], [1, 2, 3, 4, 5])
    ranked = rank_neighbors([0.0], cases)
    assert fixed_k_select(ranked, 1).indices == [1]
    assert fixed_k_select(ranked, 3).indices == [1, 0, 2]
    assert sorted(fixed_k_select(ranked, 5).indices) == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        fixed_k_select(ranked, 6)


def test_kabe_intersection_of_hand_built_clusters():
    # y=0, a=1, d=2 sit close to the query; b, c, e, f, g are far.
    dist = [0.10, 0.11, 0.12, 0.80, 0.85, 0.90, 0.92, 0.95]
    cases = CaseBase.from_arrays(dist, np.arange(1, 9) * 10.0)
    left = ClusterNode((0, 1, 3, 4), 0, 0.0)
    right = ClusterNode((2, 5, 6, 7), 2, 0.0)
    tree = ClusterTree(ClusterNode(tuple(range(8)), 0, 1.0, (left, right)), 0)
    a = kabe_select([0.0], cases, BkConfig(min_leaf_size=3), tree=tree)
    assert a.indices == [0, 1]
    assert estimate_mean(a, cases) == 15.0


def test_kabe_duplicate_isolated():
    pts = np.array([[0.05, 0.05], [0.9, 0.95], [0.92, 0.9], [1.0, 0.93], [0.95, 1.0]])
    cases = CaseBase.from_arrays(pts, [10, 20, 30, 40, 50])
    a = kabe_select(pts[0], cases, BkConfig(min_leaf_size=1))
    assert a.indices == [0]


def test_kabe_properties_random():
    rng = np.random.default_rng(9)
    for t in range(30):
        n, m = int(rng.integers(4, 40)), int(rng.integers(1, 5))
        cases = CaseBase.from_arrays(rng.random((n, m)), rng.uniform(1, 100, n))
        cfg = BkConfig(seed=t)
        tree = bisect(cases.points, cfg)
        fitted = Kabe(cfg).fit(cases)
        for _ in range(3):
            q = rng.random(m)
            a = kabe_select(q, cases, cfg, tree=tree)
            nearest = rank_neighbors(q, cases)[0].index
            assert nearest in a.indices
            assert set(a.indices) <= set(leaf_of(tree, nearest).members)
            assert fitted.select(q).indices == a.indices


def test_kabe_needs_two():
    with pytest.raises(ValueError):
        kabe_select([0.0], CaseBase.from_arrays([0.5], [1.0]))


def test_fixed_k_selector_caps_k():
    cases = CaseBase.from_arrays([0.1, 0.2], [1, 2])
    assert len(FixedK(5).fit(cases).select([0.0])) == 2
    with pytest.raises(ValueError):
        FixedK(0)


def test_estimate_mean():
    cases = CaseBase.from_arrays([0.1, 0.2, 0.3, 0.4], [10, 20, 30, 7])
    ranked = rank_neighbors([0.0], cases)
    assert estimate_mean(fixed_k_select(ranked, 3), cases) == 20.0
    assert estimate_mean(fixed_k_select(ranked, 1), [42, 0, 0, 0]) == 42.0
    assert estimate_mean(fixed_k_select(ranked, 4), [7, 7, 7, 7]) == 7.0
    with pytest.raises(ValueError):
        AnalogySet((), "fixed-k")


def test_histogram():
    assert analogy_size_histogram([1, 2, 2, 5]) == {1: 1, 2: 2, 5: 1}
    assert analogy_size_histogram([3, 3, 3]) == {3: 3}
    with pytest.raises(ValueError):
        analogy_size_histogram([])
