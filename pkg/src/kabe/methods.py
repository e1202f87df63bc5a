"""Estimators addressable by name, as used by the evaluation harness and the CLI.

Method specs: ``kabe``, ``abe-<k>``, optionally followed by an adjustment
suffix ``+sm``, ``+ga`` or ``+nn`` (``kabe+ga``, ``abe-1+sm``), and the
regression baselines ``ols``, ``sr`` and ``cart``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import baselines
from .abe import CaseBase, FixedK, Kabe
from .adjust import NULL_MODEL, SIMILARITY_MODEL, GaConfig, NnConfig, apply_adjustment, train_ga, train_nn
from .cluster import BkConfig
from .corpus import Dataset, Project

_ANALOGY_RE = re.compile(r"^(kabe|abe-?(\d+))(?:\+(sm|ga|nn))?$")


@dataclass(frozen=True)
class Prediction:
    value: float
    analogy_size: int | None = None
    flags: tuple[str, ...] = ()


def _sub_seeds(seed: int, k: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(k)]


@dataclass(frozen=True)
class AnalogyMethod:
    """k-ABE or fixed-k ABE, with an optional adjustment."""

    k: int | None = None  # None: k-ABE
    adjustment: str = "null"  # null | sm | ga | nn
    bk: BkConfig = BkConfig()
    ga: GaConfig = GaConfig()
    nn: NnConfig = NnConfig()

    @property
    def name(self) -> str:
        base = "kabe" if self.k is None else f"abe-{self.k}"
        return base if self.adjustment == "null" else f"{base}+{self.adjustment}"

    def fit(self, train: Dataset, mask: Sequence[int] | None = None, seed: int = 0) -> AnalogyPredictor:
        cases = CaseBase.from_dataset(train, mask)
        s_bk, s_adj = _sub_seeds(seed, 2)
        selector = Kabe(replace(self.bk, seed=s_bk)) if self.k is None else FixedK(self.k)
        fitted = selector.fit(cases)
        if self.adjustment == "null":
            model = NULL_MODEL
        elif self.adjustment == "sm":
            model = SIMILARITY_MODEL
        elif self.adjustment == "ga":
            model = train_ga(cases, replace(self.ga, seed=s_adj), fitted)
        elif self.adjustment == "nn":
            model = train_nn(cases, replace(self.nn, seed=s_adj), fitted)
        else:
            raise ValueError(f"unknown adjustment {self.adjustment!r}")
        return AnalogyPredictor(cases, fitted, model)


@dataclass(frozen=True)
class AnalogyPredictor:
    cases: CaseBase
    selector: object
    model: object

    def analogies(self, x: Project):
        return self.selector.select(self.cases.vector(x))

    def predict(self, x: Project) -> Prediction:
        q = self.cases.vector(x)
        a = self.selector.select(q)
        value, flags = apply_adjustment(self.model, q, a, self.cases)
        return Prediction(value, len(a), tuple(flags))


@dataclass(frozen=True)
class RegressionMethod:
    kind: str  # ols | sr | cart
    transform: str = "auto"
    min_leaf: int = 5

    @property
    def name(self) -> str:
        return self.kind

    def fit(self, train: Dataset, mask: Sequence[int] | None = None, seed: int = 0) -> RegressionPredictor:
        if self.kind == "ols":
            model = baselines.fit_ols(train, mask, self.transform)
        elif self.kind == "sr":
            model = baselines.fit_stepwise(train, mask, self.transform)
        elif self.kind == "cart":
            model = baselines.fit_cart(train, mask, self.min_leaf)
        else:
            raise ValueError(f"unknown regression method {self.kind!r}")
        return RegressionPredictor(model)


@dataclass(frozen=True)
class RegressionPredictor:
    model: object

    def predict(self, x: Project) -> Prediction:
        raw = baselines.predict_raw(self.model, x)
        value = baselines.predict(self.model, x)
        return Prediction(value, None, ("clamped",) if raw < value else ())


def parse_method(spec: str, bk: BkConfig = BkConfig(), ga: GaConfig = GaConfig(), nn: NnConfig = NnConfig()):
    spec = spec.strip().lower()
    if spec in ("ols", "sr", "cart"):
        return RegressionMethod(spec)
    m = _ANALOGY_RE.match(spec)
    if not m:
        raise ValueError(f"unknown method spec {spec!r}")
    k = None if m.group(1) == "kabe" else int(m.group(2))
    if k is not None and k < 1:
        raise ValueError("fixed k must be >= 1")
    return AnalogyMethod(k, m.group(3) or "null", bk, ga, nn)
