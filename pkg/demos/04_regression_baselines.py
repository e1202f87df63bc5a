"""
Regression baselines
====================

Ordinary least squares, forward stepwise regression and a regression tree.
"""

import numpy as np

from kabe.baselines import fit_cart, fit_ols, fit_stepwise, predict
from kabe.corpus import Dataset, FeatureKind, FeatureSchema, Project

rng = np.random.default_rng(3)
n = 40
size = rng.lognormal(4, 1, n)  # skewed, so the log transform kicks in
team = rng.choice(["small", "large"], n)
noise = rng.uniform(0, 1, n)
effort = 3 * size**0.8 * np.where(team == "large", 1.5, 1.0) * rng.lognormal(0, 0.1, n)

schema = (
    FeatureSchema("size", FeatureKind.NUMERIC, 0),
    FeatureSchema("team", FeatureKind.CATEGORICAL, 1),
    FeatureSchema("noise", FeatureKind.NUMERIC, 2),
    FeatureSchema("effort", FeatureKind.NUMERIC, 3),
)
projects = tuple(Project(str(i), (size[i], team[i], noise[i]), effort[i]) for i in range(n))
d = Dataset("demo", schema, projects)

ols = fit_ols(d)
print(ols.formula(), " R^2=%.3f" % ols.r_squared)

sr = fit_stepwise(d)
print("stepwise keeps", [d.features[j].name for j in sr.selected])
print(sr.formula())

tree = fit_cart(d)
print("tree root splits on", d.features[tree.root.feature].name)

x = Project("new", (100.0, "large", 0.5), 1.0)
for name, model in [("ols", ols), ("sr", sr), ("cart", tree)]:
    print(f"{name:4s} estimate for size 100, large team: {predict(model, x):.1f}")
