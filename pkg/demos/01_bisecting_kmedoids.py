"""
Bisecting k-medoids on a toy dataset
====================================

Grow a divisive cluster tree and look at why splits are accepted.
"""

import numpy as np

from kabe.cluster import BkConfig, bisect, leaf_of
from kabe.corpus import generate_synthetic, pairwise_distances

# two well separated blobs of 10 projects each
d = generate_synthetic(seed=7, n=20, m=2, model="two-blob")
X = np.array([p.features for p in d.projects])
print(d.name, X.shape)

# a split is kept only if both children are tighter than the parent
tree = bisect(X, BkConfig(seed=0, min_leaf_size=3))
for node in tree.root.walk():
    tag = "leaf" if node.is_leaf else "split"
    print(f"{tag:5s} size={len(node):2d} medoid={d.ids[node.medoid]:4s} variance={node.variance:.4f}")

# every project belongs to exactly one leaf
print("leaf of a0:", [d.ids[i] for i in leaf_of(tree, 0).members])

# identical points never split: 0 is not < 0
flat = bisect(np.ones((8, 2)), BkConfig(min_leaf_size=1))
print("identical points ->", len(flat.leaves), "leaf")

# the normalized distance used throughout: (1/m) * sqrt(sum of squared differences)
D = pairwise_distances(X)
print("largest distance between blobs: %.3f" % D.max())
