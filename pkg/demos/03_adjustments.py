"""
Adjusting retrieved efforts
===========================

Similarity weighting, a GA-fitted linear correction and a small neural
network, all on a dataset where effort grows linearly with one feature.
"""

import numpy as np

from kabe.abe import CaseBase, FixedK
from kabe.adjust import GaConfig, NnConfig, train_ga, train_nn
from kabe.corpus import generate_synthetic
from kabe.evaluation import loocv
from kabe.methods import parse_method

d = generate_synthetic(seed=1, n=20, m=1, model="linear")

# the GA should find roughly effort = ... + 10 * (feature difference)
cases = CaseBase.from_dataset(d)
ga = train_ga(cases, GaConfig(seed=0), FixedK(1))
print("GA coefficient:", np.round(ga.coefficients, 3))
print("GA inner MMRE, first and last generation: %.4f -> %.4f" % (ga.history[0], ga.history[-1]))

nn = train_nn(cases, NnConfig(seed=0, learning_rate=0.5, mse_threshold=1e-5), FixedK(1))
print("NN epochs: %d, final MSE %.2e" % (len(nn.history), nn.history[-1]))

# leave-one-out with default settings; with the default NN threshold the
# network stops almost at once on this fixture, so +nn does not help here
for spec in ["abe-1", "abe-1+sm", "abe-1+ga", "abe-1+nn"]:
    s = loocv(d, parse_method(spec), seed=42)
    print(f"{spec:9s} MMRE={s.mmre:.4f}")
