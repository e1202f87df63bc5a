"""Analogy-based effort estimation with per-project analogy discovery.

The main entry points:

* :func:`kabe.corpus.load_dataset` / :func:`kabe.corpus.resolve_dataset`
* :func:`kabe.cluster.bisect` (bisecting k-medoids)
* :func:`kabe.abe.kabe_select` and :class:`kabe.abe.Kabe`
* :func:`kabe.methods.parse_method` and :func:`kabe.evaluation.loocv`
"""

from .abe import AnalogySet, CaseBase, FixedK, Kabe, estimate_mean, fixed_k_select, kabe_select, rank_neighbors
from .cluster import BkConfig, ClusterTree, bisect, bisect_scalar, kmedoids_split, leaf_of
from .corpus import Dataset, Project, describe, generate_synthetic, load_dataset, resolve_dataset
from .evaluation import EvaluationSummary, loocv, win_tie_loss, wilcoxon_rank_sum
from .methods import parse_method

__version__ = "0.1.0"
