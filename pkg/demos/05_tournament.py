"""
Win-tie-loss tournament
=======================

Rank methods over several datasets. A pair of methods only wins or loses
on a dataset when the rank-sum test separates their errors.
"""

from kabe.corpus import generate_synthetic
from kabe.evaluation import boxplot_summary, loocv, win_tie_loss
from kabe.methods import parse_method

datasets = [
    generate_synthetic(seed=1, n=24, m=2, model="two-blob"),
    generate_synthetic(seed=2, n=24, m=3, model="linear"),
    generate_synthetic(seed=3, n=24, m=2, model="noise"),
]
methods = ["kabe", "abe-1", "abe-3", "ols"]

summaries = [loocv(d, parse_method(m), seed=42) for d in datasets for m in methods]
outcome = win_tie_loss(summaries)

print(f"{'method':8s} win tie loss win-loss")
for r in outcome.table():
    print(f"{r['method']:8s} {r['win']:3d} {r['tie']:3d} {r['loss']:4d} {r['win_minus_loss']:8d}")

# each method meets 3 others on 3 datasets and 3 measures
print("per-method total:", 3 * 3 * 3)

b = boxplot_summary(summaries[0].residuals)
print("kabe residuals on two-blob: median %.1f, IQR %.1f-%.1f, %d outliers" % (b.median, b.q1, b.q3, len(b.outliers)))
