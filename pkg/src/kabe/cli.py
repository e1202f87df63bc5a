"""Command-line experiment driver: ``kabe run|compare|cluster|fss``."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .abe import CaseBase
from .cluster import BkConfig, bisect
from .corpus import DatasetError, resolve_dataset
from .evaluation import FoldError, fss_search, loocv, win_tie_loss
from .adjust import GaConfig, NnConfig
from .methods import parse_method
from . import reports

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    datasets: list
    methods: list[str]
    seed: int = 42
    fss: bool = False
    output: str = "results"
    jobs: int = 1
    bk: dict = field(default_factory=dict)
    ga: dict = field(default_factory=dict)
    nn: dict = field(default_factory=dict)

    def bk_config(self) -> BkConfig:
        return BkConfig(seed=self.seed, **self.bk)

    def ga_config(self) -> GaConfig:
        ga = dict(self.ga)
        if "coefficient_bounds" in ga:
            ga["coefficient_bounds"] = tuple(ga["coefficient_bounds"])
        return GaConfig(seed=self.seed, **ga)

    def nn_config(self) -> NnConfig:
        return NnConfig(seed=self.seed, **self.nn)

    def method(self, spec: str):
        return parse_method(spec, self.bk_config(), self.ga_config(), self.nn_config())


def _schema() -> dict:
    return json.loads(resources.files("kabe").joinpath("config_schema.json").read_text(encoding="utf-8"))


def _line_of(text: str, path) -> int:
    """Best-effort line number of the JSON element at ``path``."""
    pos = 0
    for key in path:
        if isinstance(key, str):
            found = text.find(f'"{key}"', pos)
            if found < 0:
                break
            pos = found
        else:
            # Array index: step over that many commas at the current depth.
            start = text.find("[", pos)
            if start < 0:
                break
            pos = start + 1
            depth, seen = 0, 0
            while pos < len(text) and seen < key:
                ch = text[pos]
                if ch in "[{":
                    depth += 1
                elif ch in "]}":
                    depth -= 1
                elif ch == "," and depth == 0:
                    seen += 1
                pos += 1
    return text.count("\n", 0, pos) + 1


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}:{_line_of(text, list(exc.absolute_path))}: {exc.message}") from None
    cfg = ExperimentConfig(**raw)
    base = path.parent
    for i, ds in enumerate(cfg.datasets):
        if isinstance(ds, dict) and not Path(ds["path"]).is_absolute():
            cfg.datasets[i] = {**ds, "path": str(base / ds["path"])}
    return cfg


def _load(ds):
    if isinstance(ds, str):
        return resolve_dataset(ds)
    kwargs = {k: ds[k] for k in ("effort_column", "id_column", "name", "effort_unit") if k in ds}
    if "drop_columns" in ds:
        kwargs["drop_columns"] = tuple(ds["drop_columns"])
    if "schema" in ds:
        kwargs["schema_path"] = ds["schema"]
    return resolve_dataset(ds["path"], **kwargs)


def _task(args):
    cfg, dataset, spec = args
    method = cfg.method(spec)
    mask = None
    if cfg.fss:
        mask = fss_search(dataset, method, cfg.seed).best_mask
    summary = loocv(dataset, method, cfg.seed, mask)
    return summary, mask if mask is not None else dataset.full_mask()


def run_experiment(cfg: ExperimentConfig, out: Path) -> list:
    datasets = [_load(ds) for ds in cfg.datasets]
    for spec in cfg.methods:
        cfg.method(spec)
    tasks = [(cfg, d, spec) for d in datasets for spec in cfg.methods]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    summaries = [r[0] for r in results]
    masks = {(s.dataset, s.method): mask for s, mask in results} if cfg.fss else None

    out.mkdir(parents=True, exist_ok=True)
    reports.write_summary_csv(summaries, out / "summary.csv", masks)
    reports.write_summary_json(summaries, out / "summary.json", masks)
    reports.write_folds_csv(summaries, out / "folds.csv")
    reports.write_histogram_csv(summaries, out / "histogram.csv")
    reports.write_boxplot_csv(summaries, out / "boxplot.csv")
    outcome = win_tie_loss(summaries) if len(cfg.methods) > 1 else None
    if outcome is not None:
        (out / "wtl.csv").write_text(reports.wtl_csv(outcome), encoding="utf-8")
    (out / "report.md").write_text(reports.markdown_report(summaries, outcome, cfg.seed), encoding="utf-8")
    return summaries


def cmd_run(args) -> int:
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.dataset and args.method:
            cfg = ExperimentConfig(datasets=[], methods=[])
        else:
            raise ConfigError("run needs --config or both --dataset and --method")
        if args.dataset:
            cfg.datasets = list(args.dataset)
        if args.method:
            cfg.methods = list(args.method)
            for spec in cfg.methods:
                cfg.method(spec)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output = args.out
        if args.jobs is not None:
            cfg.jobs = args.jobs
        if args.fss:
            cfg.fss = True
        summaries = run_experiment(cfg, Path(cfg.output))
    except (ConfigError, DatasetError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FoldError as exc:
        print(f"fold failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for s in summaries:
        print(f"{s.dataset}\t{s.method}\tMMRE={s.mmre:.4f}\tMdMRE={s.mdmre:.4f}\tpred25={s.pred25:.1f}")
    print(f"wrote results to {cfg.output}", file=sys.stderr)
    return EXIT_OK


def _summary_files(inputs) -> list[Path]:
    files = []
    for item in inputs:
        p = Path(item)
        files.append(p / "summary.json" if p.is_dir() else p)
    return files


def cmd_compare(args) -> int:
    summaries = []
    try:
        for f in _summary_files(args.inputs):
            summaries += reports.read_summary_json(f)
        outcome = win_tie_loss(summaries, gate=args.gate)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = reports.wtl_csv(outcome)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "wtl.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_cluster(args) -> int:
    try:
        dataset = resolve_dataset(args.dataset[0], **({"effort_column": args.effort_column} if args.effort_column else {}))
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cfg = BkConfig(
        seed=42 if args.seed is None else args.seed,
        restarts=args.restarts,
        min_leaf_size=args.min_leaf,
        max_kmedoid_iters=args.max_iters,
    )
    cases = CaseBase.from_dataset(dataset)
    tree = bisect(cases.points, cfg, cases.categorical)
    json.dump({"dataset": dataset.name, **tree.to_dict(dataset.ids)}, sys.stdout, indent=1)
    sys.stdout.write("\n")
    sizes = [len(leaf) for leaf in tree.leaves]
    print(f"leaves: {len(sizes)}; sizes: {' '.join(map(str, sizes))}", file=sys.stderr)
    return EXIT_OK


def cmd_fss(args) -> int:
    try:
        dataset = resolve_dataset(args.dataset[0])
        spec = args.method[0] if args.method else "kabe"
        method = parse_method(spec)
    except (DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    seed = 42 if args.seed is None else args.seed
    res = fss_search(dataset, method, seed)
    names = [dataset.features[j].name for j in res.best_mask]
    json.dump(
        {
            "dataset": dataset.name,
            "method": method.name,
            "best_mask": list(res.best_mask),
            "best_features": names,
            "mmre_before": res.full_mmre,
            "mmre_after": res.best_mmre,
            "mode": res.mode,
            "candidates": res.candidates,
        },
        sys.stdout,
        indent=1,
    )
    sys.stdout.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kabe", description="Analogy-based effort estimation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="leave-one-out evaluation of methods over datasets")
    run.add_argument("--config", help="JSON experiment configuration")
    run.add_argument("--dataset", action="append", help="dataset name or CSV path (repeatable; overrides config)")
    run.add_argument("--method", action="append", help="method spec (repeatable; overrides config)")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--jobs", type=int)
    run.add_argument("--fss", action="store_true", help="select features per method and dataset first")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="win-tie-loss tournament from run outputs")
    cmp_.add_argument("inputs", nargs="+", help="summary.json files or run output directories")
    cmp_.add_argument("--out", help="directory for wtl.csv")
    cmp_.add_argument("--gate", choices=["mre", "residual"], default="mre")
    cmp_.set_defaults(func=cmd_compare)

    cl = sub.add_parser("cluster", help="bisecting k-medoids tree of a dataset as JSON")
    cl.add_argument("--dataset", action="append", required=True)
    cl.add_argument("--effort-column")
    cl.add_argument("--seed", type=int)
    cl.add_argument("--restarts", type=int, default=5)
    cl.add_argument("--min-leaf", type=int, default=3)
    cl.add_argument("--max-iters", type=int, default=100)
    cl.set_defaults(func=cmd_cluster)

    fs = sub.add_parser("fss", help="feature subset selection by leave-one-out MMRE")
    fs.add_argument("--dataset", action="append", required=True)
    fs.add_argument("--method", action="append")
    fs.add_argument("--seed", type=int)
    fs.set_defaults(func=cmd_fss)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
