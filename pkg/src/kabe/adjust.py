"""Adjustment of retrieved efforts before averaging.

Three techniques sit on top of an :class:`~kabe.abe.AnalogySet`:

* similarity weighting: efforts averaged with weights ``SM = 1 - d``;
* a linear correction ``sum_j alpha_j * (f_xj - f_ij)`` added to every
  analogue's effort, with ``alpha`` found by a real-coded genetic algorithm;
* a neural-network correction learning effort differences from feature
  differences.

GA and NN models are trained inside a training fold: every training project is
estimated from the other training projects with the same analogy selector used
at prediction time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .abe import AnalogySet, CaseBase, FittedSelector, estimate_mean
from .corpus import feature_deltas


@dataclass(frozen=True)
class GaConfig:
    seed: int = 0
    population: int = 50
    generations: int = 100
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    #: (low, high) for every coefficient; None means +/- twice the training effort range.
    coefficient_bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        for r in (self.crossover_rate, self.mutation_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError("rates must lie in [0, 1]")
        if self.coefficient_bounds is not None and self.coefficient_bounds[0] > self.coefficient_bounds[1]:
            raise ValueError("coefficient bounds are reversed")


@dataclass(frozen=True)
class NnConfig:
    seed: int = 0
    hidden_units: int | None = None  # None: max(4, m)
    learning_rate: float = 0.01
    mse_threshold: float = 0.01
    max_epochs: int = 5000
    batch_size: int = 16

    def __post_init__(self):
        if self.hidden_units is not None and self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if not self.mse_threshold > 0:
            raise ValueError("mse_threshold must be > 0")


@dataclass(frozen=True)
class NeuralNet:
    """One sigmoid hidden layer, linear output."""

    w_hidden: np.ndarray  # (m, h)
    b_hidden: np.ndarray  # (h,)
    w_out: np.ndarray  # (h,)
    b_out: float

    @classmethod
    def constant(cls, m: int, value: float = 0.0, hidden: int = 1) -> NeuralNet:
        return cls(np.zeros((m, hidden)), np.zeros(hidden), np.zeros(hidden), float(value))

    def hidden(self, X: np.ndarray) -> np.ndarray:
        return expit(X @ self.w_hidden + self.b_hidden)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.hidden(X) @ self.w_out + self.b_out

    def to_dict(self) -> dict:
        return {
            "w_hidden": self.w_hidden.tolist(),
            "b_hidden": self.b_hidden.tolist(),
            "w_out": self.w_out.tolist(),
            "b_out": self.b_out,
        }


@dataclass(frozen=True)
class AdjustmentModel:
    variant: str  # "null", "similarity", "ga" or "nn"
    coefficients: np.ndarray | None = None
    network: NeuralNet | None = None
    #: NN outputs are effort differences divided by this scale.
    effort_scale: float = 1.0
    history: tuple[float, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        out = {"variant": self.variant}
        if self.coefficients is not None:
            out["coefficients"] = self.coefficients.tolist()
        if self.network is not None:
            out["network"] = self.network.to_dict()
            out["effort_scale"] = self.effort_scale
        if self.history:
            out["history"] = list(self.history)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


NULL_MODEL = AdjustmentModel("null")
SIMILARITY_MODEL = AdjustmentModel("similarity")


def clamp_effort(value: float, floor: float) -> tuple[float, bool]:
    """Raise ``value`` to ``floor`` if needed; the flag tells whether it was."""
    return (floor, True) if value < floor else (float(value), False)


def adjust_similarity(analogies: AnalogySet, cases: CaseBase) -> float:
    """Similarity-weighted mean of analogue efforts.

    Falls back to the plain mean when every similarity is zero; use
    :func:`similarity_fallback` to detect that case.
    """
    sm = analogies.similarities
    if sm.sum() <= 0:
        return estimate_mean(analogies, cases)
    e = cases.efforts[analogies.indices]
    # Clip away rounding error so the result stays a convex combination.
    return float(np.clip(sm @ e / sm.sum(), e.min(), e.max()))


def similarity_fallback(analogies: AnalogySet) -> bool:
    return bool(analogies.similarities.sum() <= 0)


def _deltas(x, analogies: AnalogySet, cases: CaseBase) -> np.ndarray:
    q = cases.vector(x)
    return feature_deltas(q[None, :], cases.points[analogies.indices], cases.categorical)


def adjust_ga_raw(x, analogies: AnalogySet, cases: CaseBase, model: AdjustmentModel) -> float:
    e = cases.efforts[analogies.indices]
    correction = _deltas(x, analogies, cases) @ model.coefficients
    return float(np.mean(e + correction))


def adjust_ga(x, analogies: AnalogySet, cases: CaseBase, model: AdjustmentModel) -> float:
    """Mean over analogues of ``e_i + sum_j alpha_j * (f_xj - f_ij)``, clamped."""
    return clamp_effort(adjust_ga_raw(x, analogies, cases, model), cases.effort_floor)[0]


def adjust_nn_raw(x, analogies: AnalogySet, cases: CaseBase, model: AdjustmentModel) -> float:
    e = cases.efforts[analogies.indices]
    correction = model.effort_scale * model.network(_deltas(x, analogies, cases))
    return float(np.mean(e + correction))


def adjust_nn(x, analogies: AnalogySet, cases: CaseBase, model: AdjustmentModel) -> float:
    """Mean over analogues of ``e_i + scale * net(x - y_i)``, clamped."""
    return clamp_effort(adjust_nn_raw(x, analogies, cases, model), cases.effort_floor)[0]


def _inner_analogies(cases: CaseBase, selector) -> list[AnalogySet]:
    """Leave-one-out analogy sets inside the training fold."""
    if len(cases) < 3:
        raise ValueError("adjustment training needs at least 3 training projects")
    fitted = selector if isinstance(selector, FittedSelector) else selector.fit(cases)
    return [fitted.select(cases.points[j], exclude=j) for j in range(len(cases))]


def _effort_range(cases: CaseBase) -> float:
    r = float(np.ptp(cases.efforts))
    return r if r > 0 else 1.0


def train_ga(cases: CaseBase, cfg: GaConfig, selector) -> AdjustmentModel:
    """Fit one linear coefficient per feature by minimizing inner leave-one-out MMRE.

    Tournament selection (size 2), uniform crossover, Gaussian mutation with
    sigma equal to 10% of the bound width, and the best individual carried
    over unchanged each generation. The all-zero vector seeds the first
    population, so the result is never worse than the unadjusted mean on the
    training fold.
    """
    sets = _inner_analogies(cases, selector)
    m = cases.points.shape[1]
    n = len(cases)
    base = np.empty(n)
    mean_delta = np.empty((n, m))
    for j, a in enumerate(sets):
        base[j] = cases.efforts[a.indices].mean()
        mean_delta[j] = _deltas(cases.points[j], a, cases).mean(axis=0)
    actual = cases.efforts
    floor = cases.effort_floor

    if cfg.coefficient_bounds is None:
        r = 2.0 * _effort_range(cases)
        lo, hi = -r, r
    else:
        lo, hi = cfg.coefficient_bounds
    sigma = 0.1 * (hi - lo)

    def fitness(pop):
        pred = np.maximum(base[None, :] + pop @ mean_delta.T, floor)
        return (np.abs(actual[None, :] - pred) / actual[None, :]).mean(axis=1)

    rng = np.random.default_rng(cfg.seed)
    P = cfg.population
    pop = rng.uniform(lo, hi, size=(P, m))
    pop[0] = np.clip(0.0, lo, hi)
    fit = fitness(pop)
    history = [float(fit.min())]
    for _ in range(cfg.generations):
        elite = pop[np.argmin(fit)].copy()
        a, b = rng.integers(P, size=P), rng.integers(P, size=P)
        children = pop[np.where(fit[a] <= fit[b], a, b)].copy()
        for i in range(0, P - 1, 2):
            if rng.random() < cfg.crossover_rate:
                swap = rng.random(m) < 0.5
                children[i, swap], children[i + 1, swap] = children[i + 1, swap], children[i, swap].copy()
        mutate = rng.random((P, m)) < cfg.mutation_rate
        children = np.clip(children + mutate * rng.normal(0.0, sigma, size=(P, m)), lo, hi)
        children[0] = elite
        pop = children
        fit = fitness(pop)
        history.append(float(fit.min()))
    best = pop[np.argmin(fit)]
    return AdjustmentModel("ga", coefficients=best.copy(), history=tuple(history))


def training_pairs(cases: CaseBase, selector) -> tuple[np.ndarray, np.ndarray]:
    """Feature-difference inputs and scaled effort-difference targets."""
    scale = _effort_range(cases)
    X, y = [], []
    for j, a in enumerate(_inner_analogies(cases, selector)):
        X.append(_deltas(cases.points[j], a, cases))
        y.append((cases.efforts[j] - cases.efforts[a.indices]) / scale)
    return np.vstack(X), np.concatenate(y)


def train_nn(cases: CaseBase, cfg: NnConfig, selector) -> AdjustmentModel:
    """Backpropagation on (feature difference -> effort difference) pairs.

    Mini-batch gradient descent on squared error; stops once the epoch MSE
    drops below ``cfg.mse_threshold`` or after ``cfg.max_epochs``. Training
    also stops if the weights diverge, returning the last finite network.
    """
    X, y = training_pairs(cases, selector)
    m = X.shape[1]
    h = cfg.hidden_units or max(4, m)
    rng = np.random.default_rng(cfg.seed)
    W1 = rng.uniform(-0.5, 0.5, size=(m, h))
    b1 = rng.uniform(-0.5, 0.5, size=h)
    w2 = rng.uniform(-0.5, 0.5, size=h)
    b2 = 0.0
    lr = cfg.learning_rate
    n = len(y)
    history = []
    net = NeuralNet(W1, b1, w2, b2)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.max_epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                xb, yb = X[idx], y[idx]
                hid = expit(xb @ W1 + b1)
                err = hid @ w2 + b2 - yb
                g_out = 2.0 * err / len(idx)
                g_hid = np.outer(g_out, w2) * hid * (1.0 - hid)
                w2 = w2 - lr * (hid.T @ g_out)
                b2 = b2 - lr * g_out.sum()
                W1 = W1 - lr * (xb.T @ g_hid)
                b1 = b1 - lr * g_hid.sum(axis=0)
            candidate = NeuralNet(W1, b1, w2, float(b2))
            mse = float(np.mean((candidate(X) - y) ** 2))
            if not np.isfinite(mse):
                # Diverged (learning rate too high): keep the last finite network.
                break
            net = candidate
            history.append(mse)
            if mse < cfg.mse_threshold:
                break
    return AdjustmentModel("nn", network=net, effort_scale=_effort_range(cases), history=tuple(history))


def apply_adjustment(model: AdjustmentModel, x, analogies: AnalogySet, cases: CaseBase) -> tuple[float, list[str]]:
    """Estimate with any adjustment variant; returns (estimate, flags)."""
    if model.variant == "null":
        return estimate_mean(analogies, cases), []
    if model.variant == "similarity":
        flags = ["similarity-fallback"] if similarity_fallback(analogies) else []
        return adjust_similarity(analogies, cases), flags
    if model.variant == "ga":
        raw = adjust_ga_raw(x, analogies, cases, model)
    elif model.variant == "nn":
        raw = adjust_nn_raw(x, analogies, cases, model)
    else:
        raise ValueError(f"unknown adjustment variant {model.variant!r}")
    value, clamped = clamp_effort(raw, cases.effort_floor)
    return value, (["clamped"] if clamped else [])
