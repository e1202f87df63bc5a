"""Datasets of historical projects, their normalization and the project distance.

A :class:`Dataset` keeps the raw feature values of every project (floats for
numeric columns, strings for categorical ones). Estimation code never works on
the raw values directly: a :class:`NormalizationModel` is fitted on a training
fold and maps projects into a normalized space where numeric features live in
``[0, 1]`` and categorical features are carried as integer level codes.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

MISSING_TOKENS = frozenset({"", "?", "na", "n/a", "nan", "null", "none"})

#: Names resolvable by :func:`resolve_dataset` without a path.
BUNDLED_NAMES = ("albrecht", "kemerer", "cocomo", "desharnais", "maxwell", "china", "nasa", "telecom")

#: Effort column headers used by the public PROMISE files, tried in order.
EFFORT_COLUMN_CANDIDATES = ("effort", "efforts", "effortmm", "act_effort", "actual", "actual_effort", "summwork")

DATA_DIR_ENV = "KABE_DATA_DIR"
ISBSG_ENV = "KABE_ISBSG_PATH"


class DatasetError(ValueError):
    """Raised for unreadable or unusable dataset input."""


class FeatureKind(enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    kind: FeatureKind
    index: int


@dataclass(frozen=True)
class Project:
    id: str
    features: tuple
    effort: float

    def __post_init__(self):
        if not self.effort > 0:
            raise DatasetError(f"project {self.id}: non-positive effort {self.effort!r}")


@dataclass(frozen=True)
class LoadReport:
    rows_loaded: int
    rows_dropped: int

    def to_json(self) -> str:
        return json.dumps({"rows_loaded": self.rows_loaded, "rows_dropped": self.rows_dropped})


@dataclass(frozen=True)
class DatasetStats:
    size: int
    feature_count: int
    effort_min: float
    effort_max: float
    effort_mean: float
    effort_median: float
    effort_skewness: float


@dataclass(frozen=True)
class Dataset:
    """A named collection of projects sharing one schema.

    ``schema`` lists the predictor columns (indices ``0..m-1``) followed by the
    effort column (index ``m``), which is always numeric.
    """

    name: str
    schema: tuple[FeatureSchema, ...]
    projects: tuple[Project, ...]
    effort_unit: str = "hours"
    report: LoadReport | None = field(default=None, compare=False)

    def __post_init__(self):
        names = [s.name for s in self.schema]
        if len(set(names)) != len(names):
            raise DatasetError(f"duplicate column names in {self.name}")
        if [s.index for s in self.schema] != list(range(len(self.schema))):
            raise DatasetError("schema indices must be dense from 0")
        if not self.schema or self.schema[-1].kind is not FeatureKind.NUMERIC:
            raise DatasetError("the effort column must be numeric")
        m = len(self.schema) - 1
        for p in self.projects:
            if len(p.features) != m:
                raise DatasetError(f"project {p.id} has {len(p.features)} features, schema has {m}")

    def __len__(self) -> int:
        return len(self.projects)

    @property
    def features(self) -> tuple[FeatureSchema, ...]:
        return self.schema[:-1]

    @property
    def effort_column(self) -> str:
        return self.schema[-1].name

    @property
    def efforts(self) -> np.ndarray:
        return np.array([p.effort for p in self.projects], dtype=float)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.projects]

    def full_mask(self) -> tuple[int, ...]:
        return tuple(range(len(self.features)))

    def categorical(self, mask: Sequence[int] | None = None) -> np.ndarray:
        mask = self.full_mask() if mask is None else mask
        return np.array([self.features[j].kind is FeatureKind.CATEGORICAL for j in mask], dtype=bool)

    def levels(self, j: int) -> tuple[str, ...]:
        """Sorted distinct values of categorical feature ``j``."""
        return tuple(sorted({p.features[j] for p in self.projects}))

    def subset(self, indices: Sequence[int]) -> Dataset:
        return Dataset(self.name, self.schema, tuple(self.projects[i] for i in indices), self.effort_unit)

    def without(self, index: int) -> Dataset:
        return self.subset([i for i in range(len(self)) if i != index])


def _is_missing(token: str) -> bool:
    return token.strip().lower() in MISSING_TOKENS


def _parses_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _find_effort_column(header: Sequence[str]) -> str:
    lowered = {h.strip().lower(): h for h in header}
    for cand in EFFORT_COLUMN_CANDIDATES:
        if cand in lowered:
            return lowered[cand]
    raise DatasetError(f"no effort column found among {list(header)}; pass effort_column explicitly")


def _read_sidecar(path: Path, schema_path: str | os.PathLike | None) -> dict[str, FeatureKind]:
    if schema_path is None:
        guess = path.with_suffix(".schema.json")
        if not guess.exists():
            return {}
        schema_path = guess
    with open(schema_path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        return {col: FeatureKind(kind) for col, kind in raw.items()}
    except ValueError as exc:
        raise DatasetError(f"{schema_path}: {exc}") from None


def load_dataset(
    path: str | os.PathLike,
    effort_column: str | None = None,
    *,
    name: str | None = None,
    id_column: str | None = None,
    drop_columns: Sequence[str] = (),
    schema_path: str | os.PathLike | None = None,
    effort_unit: str = "hours",
) -> Dataset:
    """Read a comma-separated file with a header row into a :class:`Dataset`.

    Every column except ``id_column`` and ``drop_columns`` is used. Rows with a
    missing value in any used column are dropped and counted in
    ``Dataset.report``. Column kinds are inferred (numeric when every value
    parses as a float) unless a sidecar ``<file>.schema.json`` or
    ``schema_path`` maps column names to ``"numeric"``/``"categorical"``.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(tok.strip() for tok in r)]

    effort_column = effort_column or _find_effort_column(header)
    if effort_column not in header:
        raise DatasetError(f"{path}: missing effort column {effort_column!r}")
    for col in (id_column, *drop_columns):
        if col is not None and col not in header:
            raise DatasetError(f"{path}: unknown column {col!r}")

    skip = {id_column, *drop_columns, effort_column}
    used = [i for i, h in enumerate(header) if h not in skip]
    e_pos = header.index(effort_column)
    id_pos = header.index(id_column) if id_column else None

    complete = []
    for r in body:
        if len(r) != len(header):
            raise DatasetError(f"{path}: row has {len(r)} fields, header has {len(header)}")
        if any(_is_missing(r[i]) for i in (*used, e_pos)):
            continue
        complete.append(r)
    dropped = len(body) - len(complete)
    if not complete:
        raise DatasetError(f"{path}: zero usable rows")

    for r in complete:
        tok = r[e_pos].strip()
        if not _parses_float(tok):
            raise DatasetError(f"{path}: effort column {effort_column!r} is not numeric ({tok!r})")
        if not float(tok) > 0:
            raise DatasetError(f"{path}: non-positive effort {tok!r}")

    overrides = _read_sidecar(path, schema_path)
    kinds = []
    for i in used:
        kind = overrides.get(header[i])
        if kind is None:
            numeric = all(_parses_float(r[i].strip()) for r in complete)
            kind = FeatureKind.NUMERIC if numeric else FeatureKind.CATEGORICAL
        kinds.append(kind)

    schema = tuple(FeatureSchema(header[i], k, j) for j, (i, k) in enumerate(zip(used, kinds)))
    schema += (FeatureSchema(effort_column, FeatureKind.NUMERIC, len(used)),)

    projects = []
    for n, r in enumerate(complete):
        feats = []
        for i, k in zip(used, kinds):
            tok = r[i].strip()
            if k is FeatureKind.NUMERIC:
                try:
                    feats.append(float(tok))
                except ValueError:
                    raise DatasetError(f"{path}: column {header[i]!r} declared numeric but has {tok!r}") from None
            else:
                feats.append(tok)
        pid = r[id_pos].strip() if id_pos is not None else str(n + 1)
        projects.append(Project(pid, tuple(feats), float(r[e_pos])))

    return Dataset(
        name=name or path.stem,
        schema=schema,
        projects=tuple(projects),
        effort_unit=effort_unit,
        report=LoadReport(len(complete), dropped),
    )


def resolve_dataset(spec: str, **kwargs) -> Dataset:
    """Load a dataset from a path, a bundled name, ``isbsg`` or a synthetic spec.

    Bundled names are looked up as ``<name>.csv`` in ``$KABE_DATA_DIR`` and then
    in the package ``data`` directory. ``isbsg`` reads ``$KABE_ISBSG_PATH``.
    ``synthetic:<model>[:n[:m[:seed]]]`` builds a generated dataset.
    """
    if spec.startswith("synthetic:"):
        parts = spec.split(":")[1:]
        model = parts[0]
        n = int(parts[1]) if len(parts) > 1 else 20
        m = int(parts[2]) if len(parts) > 2 else 2
        seed = int(parts[3]) if len(parts) > 3 else 0
        return generate_synthetic(seed, n, m, model)
    if spec.lower() == "isbsg":
        env = os.environ.get(ISBSG_ENV)
        if not env:
            raise DatasetError(f"isbsg requires ${ISBSG_ENV} to point at the user-supplied file")
        return load_dataset(env, name="isbsg", **kwargs)
    if spec.lower() in BUNDLED_NAMES:
        return load_dataset(bundled_path(spec.lower()), name=spec.lower(), **kwargs)
    return load_dataset(spec, **kwargs)


def bundled_path(name: str) -> Path:
    candidates = []
    if os.environ.get(DATA_DIR_ENV):
        candidates.append(Path(os.environ[DATA_DIR_ENV]) / f"{name}.csv")
    candidates.append(Path(__file__).parent / "data" / f"{name}.csv")
    for c in candidates:
        if c.is_file():
            return c
    raise DatasetError(
        f"dataset {name!r} not found (looked in {', '.join(str(c) for c in candidates)}); "
        f"place the PROMISE CSV there or set ${DATA_DIR_ENV}"
    )


def skewness(values) -> float:
    """Adjusted Fisher-Pearson sample skewness; 0 when undefined."""
    x = np.asarray(values, dtype=float)
    if x.size < 3 or np.ptp(x) == 0:
        return 0.0
    return float(stats.skew(x, bias=False))


def describe(d: Dataset) -> DatasetStats:
    if len(d) == 0:
        raise DatasetError("cannot describe an empty dataset")
    e = d.efforts
    return DatasetStats(
        size=len(d),
        feature_count=len(d.schema),
        effort_min=float(e.min()),
        effort_max=float(e.max()),
        effort_mean=float(e.mean()),
        effort_median=float(np.median(e)),
        effort_skewness=skewness(e),
    )


def encode(d: Dataset, mask: Sequence[int] | None = None) -> np.ndarray:
    """Raw feature matrix with categorical values replaced by level codes."""
    mask = d.full_mask() if mask is None else tuple(mask)
    out = np.empty((len(d), len(mask)), dtype=float)
    for c, j in enumerate(mask):
        if d.features[j].kind is FeatureKind.CATEGORICAL:
            code = {lv: k for k, lv in enumerate(d.levels(j))}
            out[:, c] = [code[p.features[j]] for p in d.projects]
        else:
            out[:, c] = [p.features[j] for p in d.projects]
    return out


def check_mask(mask: Sequence[int], m: int) -> tuple[int, ...]:
    mask = tuple(int(j) for j in mask)
    if not mask:
        raise DatasetError("feature mask must not be empty")
    if len(set(mask)) != len(mask) or any(j < 0 or j >= m for j in mask):
        raise DatasetError(f"invalid feature mask {mask} for {m} predictors")
    return mask


@dataclass(frozen=True)
class NormalizationModel:
    """Per-feature min/max observed on a training fold.

    Entries for categorical features hold their level list instead; ``mins``
    and ``maxs`` are NaN there.
    """

    mask: tuple[int, ...]
    mins: np.ndarray
    maxs: np.ndarray
    categorical: np.ndarray
    levels: tuple

    def transform(self, p: Project) -> np.ndarray:
        return normalize(p, self, self.mask)


def fit_normalizer(train: Sequence[Project] | Dataset, mask: Sequence[int], schema=None) -> NormalizationModel:
    """Fit min/max scaling on ``train`` (projects of one dataset).

    ``schema`` is needed only when ``train`` is a bare project sequence and the
    mask contains categorical features; without it every feature is treated
    as numeric.
    """
    if isinstance(train, Dataset):
        schema = train.features
        projects = train.projects
    else:
        projects = tuple(train)
    if not projects:
        raise DatasetError("cannot fit a normalizer on an empty training set")
    mask = check_mask(mask, len(projects[0].features))
    cat = np.array(
        [schema is not None and schema[j].kind is FeatureKind.CATEGORICAL for j in mask], dtype=bool
    )
    mins = np.full(len(mask), np.nan)
    maxs = np.full(len(mask), np.nan)
    levels = []
    for c, j in enumerate(mask):
        col = [p.features[j] for p in projects]
        if cat[c]:
            levels.append(tuple(sorted(set(col))))
        else:
            v = np.asarray(col, dtype=float)
            mins[c], maxs[c] = v.min(), v.max()
            levels.append(None)
    return NormalizationModel(mask, mins, maxs, cat, tuple(levels))


def normalize(p: Project, nm: NormalizationModel, mask: Sequence[int] | None = None) -> np.ndarray:
    """Map ``p`` into the normalized space of ``nm``.

    Numeric values become ``(v - min) / (max - min)`` clamped to ``[0, 1]``;
    constant training features map to 0. Categorical values become the index
    of the level among the training levels, or ``-1`` for an unseen level
    (which mismatches every training project).
    """
    mask = nm.mask if mask is None else tuple(mask)
    if mask != nm.mask:
        raise DatasetError(f"mask {mask} does not match the normalizer's mask {nm.mask}")
    out = np.empty(len(mask))
    for c, j in enumerate(mask):
        v = p.features[j]
        if nm.categorical[c]:
            lv = nm.levels[c]
            out[c] = lv.index(v) if v in lv else -1.0
        else:
            span = nm.maxs[c] - nm.mins[c]
            out[c] = 0.0 if span == 0 else min(1.0, max(0.0, (float(v) - nm.mins[c]) / span))
    return out


def normalize_all(projects: Sequence[Project], nm: NormalizationModel) -> np.ndarray:
    if not projects:
        return np.empty((0, len(nm.mask)))
    return np.vstack([normalize(p, nm) for p in projects])


def feature_deltas(a: np.ndarray, b: np.ndarray, categorical: np.ndarray | None = None) -> np.ndarray:
    """Per-feature differences ``a - b``; categorical positions give 0/1 mismatch.

    Broadcasts over leading axes of ``a`` and ``b``.
    """
    delta = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if categorical is not None and np.any(categorical):
        delta = np.where(categorical, (delta != 0).astype(float), delta)
    return delta


def distance(a, b, categorical=None) -> float:
    """Project distance ``(1/m) * sqrt(sum(delta_i ** 2))``.

    The ``1/m`` factor sits outside the square root. Categorical features
    contribute 0 when equal and 1 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("distance needs at least one feature")
    d = feature_deltas(a, b, categorical)
    return float(math.sqrt(float(d @ d)) / a.size)


def distances_to(points: np.ndarray, q: np.ndarray, categorical=None) -> np.ndarray:
    """Distance from query ``q`` to every row of ``points``."""
    d = feature_deltas(points, q[None, :], categorical)
    return np.sqrt(np.einsum("ij,ij->i", d, d)) / points.shape[1]


def pairwise_distances(points: np.ndarray, categorical=None) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    n, m = points.shape
    cat = np.zeros(m, dtype=bool) if categorical is None else np.asarray(categorical, dtype=bool)
    num = points[:, ~cat]
    sq = np.zeros((n, n))
    if num.shape[1]:
        # Exact (no Gram-matrix trick) so identical rows give exactly 0.
        diff = num[:, None, :] - num[None, :, :]
        sq += np.einsum("ijk,ijk->ij", diff, diff)
    for c in np.flatnonzero(cat):
        col = points[:, c]
        sq += col[:, None] != col[None, :]
    return np.sqrt(sq) / m


def similarity(d: float) -> float:
    """Similarity degree ``1 - d`` for a distance already scaled into ``[0, 1]``."""
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"scaled distance {d} outside [0, 1]")
    return 1.0 - d


def generate_synthetic(seed: int, n: int, m: int, model: str = "linear") -> Dataset:
    """Deterministic toy datasets.

    ``linear``
        every feature column is a shuffled ``linspace(1, 2, n)`` and
        ``effort = 10 * sum(features)``.
    ``two-blob``
        first ``n // 2`` projects scattered within radius 1 of the origin with
        effort near 100, the rest around ``(10, ..., 10)`` with effort near 1000.
    ``noise``
        uniform features and log-normal effort unrelated to them.
    """
    if n < 2:
        raise DatasetError("synthetic datasets need n >= 2")
    if m < 1:
        raise DatasetError("synthetic datasets need m >= 1")
    rng = np.random.default_rng(seed)
    ids = [f"s{i}" for i in range(n)]
    if model == "linear":
        X = np.column_stack([rng.permutation(np.linspace(1.0, 2.0, n)) for _ in range(m)])
        y = 10.0 * X.sum(axis=1)
    elif model == "two-blob":
        half = n // 2
        X = rng.uniform(-1.0, 1.0, size=(n, m)) / math.sqrt(m)
        X[half:] += 10.0
        y = np.where(np.arange(n) < half, 100.0, 1000.0) * rng.uniform(0.9, 1.1, size=n)
        ids = [f"a{i}" if i < half else f"b{i - half}" for i in range(n)]
    elif model == "noise":
        X = rng.uniform(0.0, 1.0, size=(n, m))
        y = rng.lognormal(mean=5.0, sigma=1.0, size=n)
    else:
        raise DatasetError(f"unknown synthetic model {model!r}")
    schema = tuple(FeatureSchema(f"f{j}", FeatureKind.NUMERIC, j) for j in range(m))
    schema += (FeatureSchema("effort", FeatureKind.NUMERIC, m),)
    projects = tuple(Project(ids[i], tuple(float(v) for v in X[i]), float(y[i])) for i in range(n))
    return Dataset(f"synthetic-{model}", schema, projects, "hours")
