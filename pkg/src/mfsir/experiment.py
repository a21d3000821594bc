"""Cross-validated feature-fraction sweeps, baseline rankers, result files and rank comparisons."""

from __future__ import annotations

import csv
import logging
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from . import stats
from .dataset import (MultiLabelDataset, kfold_split, load_dataset, select_features,
                      standardize)
from .estimator import DivergenceError, FeatureRanking, MfsirConfig, fit, ranking_from_scores
from .metrics import evaluate
from .mlknn import mlknn_fit, mlknn_predict

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
METRICS = ("hl", "rl", "mauc", "mf1")
LOWER_IS_BETTER = {"hl": True, "rl": True, "mauc": False, "mf1": False}
TIMING_COLUMNS = ("rank_seconds", "eval_seconds")


class ConfigError(ValueError):
    pass


class CoverageError(ValueError):
    """Results do not cover enough algorithms and datasets for a comparison."""


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[tuple[str, str], ...] = ()
    algorithms: tuple[str, ...] = ("mfsir", "variance", "random")
    alpha: float = 1.0
    beta: float = 1.0
    eta: float = 1e-4
    varpi: float = 1e-5
    latent_dim: int | None = None
    t_max: int = 200
    tol: float = 1e-5
    init_mode: str = "sparse_nonneg"
    graph_p: int = 5
    graph_lambda: float | None = None
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    cv_folds: int = 5
    knn_k: int = 10
    knn_s: float = 1.0
    seeds: tuple[int, ...] = (0,)
    standardize: bool = True
    alpha_grid: tuple[float, ...] = ()
    beta_grid: tuple[float, ...] = ()
    output_dir: str = "results"
    jobs: int = 1
    plots: bool = False

    def __post_init__(self):
        fr = self.fractions
        if not fr or any(not 0 < f <= 1 for f in fr):
            raise ConfigError("fractions must lie in (0, 1]")
        if any(b <= a for a, b in zip(fr, fr[1:])):
            raise ConfigError("fractions must be strictly increasing")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be at least 2")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        unknown = set(self.algorithms) - {"mfsir", "variance", "random"}
        if unknown:
            raise ConfigError(f"unknown algorithms: {sorted(unknown)}")
        try:
            self.mfsir_config(self.alpha, self.beta, 0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def mfsir_config(self, alpha: float, beta: float, seed: int) -> MfsirConfig:
        return MfsirConfig(alpha=alpha, beta=beta, eta=self.eta, varpi=self.varpi,
                           latent_dim=self.latent_dim, t_max=self.t_max, tol=self.tol,
                           seed=seed, init_mode=self.init_mode, graph_p=self.graph_p,
                           graph_lambda=self.graph_lambda)


# ---------------------------------------------------------------------------
# config file

def _tuple(conv):
    def parse(text: str):
        return tuple(conv(x.strip()) for x in text.replace(";", ",").split(",") if x.strip())
    return parse


def _optional(conv):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none", "auto", "adaptive") else conv(text)
    return parse


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _datasets(text: str):
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        arff, sep, xml = item.partition(":")
        if not sep:
            xml = os.path.splitext(arff)[0] + ".xml"
        pairs.append((arff.strip(), xml.strip()))
    return tuple(pairs)


CONFIG_KEYS = {
    "datasets": _datasets,
    "algorithms": _tuple(str),
    "alpha": float, "beta": float, "eta": float, "varpi": float,
    "latent_dim": _optional(int), "t_max": int, "tol": float, "init_mode": str,
    "graph_p": int, "graph_lambda": _optional(float),
    "fractions": _tuple(float), "cv_folds": int, "knn_k": int, "knn_s": float,
    "seeds": _tuple(int), "standardize": _bool,
    "alpha_grid": _tuple(float), "beta_grid": _tuple(float),
    "output_dir": str, "jobs": int, "plots": _bool,
}


def parse_config_text(text: str) -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value.strip()
    return raw


def build_config(raw: dict[str, str], base_dir: str = ".") -> ExperimentConfig:
    values = {}
    for key, text in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None
    if "datasets" in values:
        values["datasets"] = tuple(
            (os.path.join(base_dir, a), os.path.join(base_dir, x)) for a, x in values["datasets"])
    if "output_dir" in values:
        values["output_dir"] = os.path.join(base_dir, values["output_dir"])
    return ExperimentConfig(**values)


def load_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        raw = parse_config_text(fh.read())
    base = os.path.dirname(os.path.abspath(path))
    cfg = build_config(raw, base)
    if overrides:
        cfg = replace(cfg, **{k: v for k, v in vars(build_config(overrides)).items()
                              if k in overrides})
    return cfg


# ---------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class RunRecord:
    dataset: str
    algorithm: str
    fraction: float
    n_selected: int
    fold: int
    seed: int
    alpha: float
    beta: float
    status: str
    hl: float
    rl: float
    mauc: float
    mf1: float
    skipped_i: int
    skipped_l: int
    iterations: int
    final_objective: float
    rank_seconds: float
    eval_seconds: float
    history: tuple[float, ...] = field(default=(), repr=False, compare=False)


RECORD_COLUMNS = tuple(f.name for f in fields(RunRecord) if f.name != "history")


def task_seed(seed: int, task_id: str) -> int:
    """Per-task RNG seed, independent of scheduling order."""
    return (seed ^ zlib.crc32(task_id.encode("utf-8"))) & 0xFFFFFFFF


def n_selected(fraction: float, m: int) -> int:
    # round first so that e.g. 0.05 * 100 does not ceil to 6
    return max(1, min(m, math.ceil(round(fraction * m, 9))))


def baseline_rank(method: str, train: MultiLabelDataset, seed: int = 0) -> FeatureRanking:
    if method == "variance":
        return ranking_from_scores(train.X.var(axis=0))
    if method == "random":
        perm = np.random.default_rng(seed).permutation(train.m)
        scores = np.empty(train.m)
        scores[perm] = np.arange(train.m, 0, -1, dtype=float)
        return FeatureRanking(perm, scores)
    raise ValueError(f"unknown baseline {method!r}")


def _algorithm_variants(cfg: ExperimentConfig):
    out = []
    for algo in cfg.algorithms:
        if algo == "mfsir":
            out.append(("mfsir", cfg.alpha, cfg.beta))
            out += [(f"mfsir[alpha={a:g}]", a, cfg.beta) for a in cfg.alpha_grid]
            out += [(f"mfsir[beta={b:g}]", cfg.alpha, b) for b in cfg.beta_grid]
        else:
            out.append((algo, math.nan, math.nan))
    return out


def _run_fold(cfg: ExperimentConfig, d: MultiLabelDataset, seed: int, fold: int,
              train_idx, test_idx) -> list[RunRecord]:
    train, test = d.subset(train_idx), d.subset(test_idx)
    if cfg.standardize:
        train, scaler = standardize(train)
        test = scaler.apply(test)
    records = []
    for name, alpha, beta in _algorithm_variants(cfg):
        tid = f"{d.name}/{seed}/{fold}/{name}"
        iterations, objective, history = 0, math.nan, ()
        t0 = time.perf_counter()
        try:
            if name.startswith("mfsir"):
                model, ranking = fit(train.X, train.Y,
                                     cfg.mfsir_config(alpha, beta, task_seed(seed, tid)))
                iterations = model.iterations_run
                objective = model.objective_history[-1]
                history = tuple(model.objective_history)
            else:
                ranking = baseline_rank(name, train, task_seed(seed, tid))
        except DivergenceError as exc:
            log.warning("%s: %s", tid, exc)
            ranking = None
            iterations = exc.iteration
        rank_seconds = time.perf_counter() - t0

        for fraction in cfg.fractions:
            k_sel = n_selected(fraction, d.m)
            common = dict(dataset=d.name, algorithm=name, fraction=fraction, n_selected=k_sel,
                          fold=fold, seed=seed, alpha=alpha, beta=beta, iterations=iterations,
                          final_objective=objective, rank_seconds=rank_seconds, history=history)
            if ranking is None:
                records.append(RunRecord(status="failed", hl=math.nan, rl=math.nan,
                                         mauc=math.nan, mf1=math.nan, skipped_i=0,
                                         skipped_l=0, eval_seconds=0.0, **common))
                continue
            t1 = time.perf_counter()
            top = ranking.top(k_sel)
            model = mlknn_fit(select_features(train, top), cfg.knn_k, cfg.knn_s)
            scores, pred = mlknn_predict(model, test.X[:, top])
            res = evaluate(pred, scores, test.Y)
            records.append(RunRecord(status="ok", hl=res.hamming_loss, rl=res.ranking_loss,
                                     mauc=res.macro_auc, mf1=res.macro_f1,
                                     skipped_i=res.skipped_instances,
                                     skipped_l=res.skipped_labels,
                                     eval_seconds=time.perf_counter() - t1, **common))
    return records


def _run_task(args) -> list[RunRecord]:
    cfg, paths, seed, fold = args
    d = load_dataset(*paths)
    folds = kfold_split(d.n, cfg.cv_folds, seed)
    train_idx, test_idx = folds.train_test(fold)
    return _run_fold(cfg, d, seed, fold, train_idx, test_idx)


def run_experiment(cfg: ExperimentConfig,
                   datasets: Sequence[MultiLabelDataset] | None = None) -> list[RunRecord]:
    """Cross-validated evaluation of every algorithm at every feature fraction.

    Per fold the training split is standardized, each ranker is fitted on it,
    and ML-kNN trained on the top features is scored on the test split.
    ``datasets`` bypasses loading ``cfg.datasets`` from disk.
    """
    if cfg.jobs > 1 and datasets is None:
        tasks = []
        for paths in cfg.datasets:
            n = load_dataset(*paths).n
            tasks += [(cfg, paths, seed, fold) for seed in cfg.seeds for fold in range(cfg.cv_folds)
                      if cfg.cv_folds <= n]
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return [r for chunk in pool.map(_run_task, tasks) for r in chunk]

    if datasets is None:
        datasets = [load_dataset(*paths) for paths in cfg.datasets]
    records: list[RunRecord] = []
    for d in datasets:
        for seed in cfg.seeds:
            folds = kfold_split(d.n, cfg.cv_folds, seed)
            for fold in range(cfg.cv_folds):
                train_idx, test_idx = folds.train_test(fold)
                log.info("%s seed=%d fold=%d", d.name, seed, fold)
                records += _run_fold(cfg, d, seed, fold, train_idx, test_idx)
    return records


# ---------------------------------------------------------------------------
# output files

def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_results(records: Sequence[RunRecord], path) -> None:
    _write_csv(path, RECORD_COLUMNS, ([getattr(r, c) for c in RECORD_COLUMNS] for r in records))


def read_results(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key in ("fraction", "alpha", "beta", *METRICS, "final_objective", *TIMING_COLUMNS):
            if key in row:
                row[key] = float(row[key])
    return rows


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def _group(records, keys):
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        if r.status == "ok":
            groups.setdefault(tuple(getattr(r, k) for k in keys), []).append(r)
    return groups


def summarize_records(records, by_fraction: bool = False) -> list[tuple]:
    keys = ("dataset", "algorithm", "fraction") if by_fraction else ("dataset", "algorithm")
    rows = []
    for key, group in _group(records, keys).items():
        for metric in METRICS:
            mean, std = mean_std([getattr(r, metric) for r in group])
            rows.append((*key, metric, mean, std, len(group)))
    return rows


def emit_outputs(records: Sequence[RunRecord], out_dir, plots: bool = False) -> list[str]:
    """Write every result file for a run and return their paths."""
    if not records:
        raise ValueError("no records to write")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path(*parts):
        p = os.path.join(out_dir, *parts)
        written.append(p)
        return p

    write_results(records, path("results.csv"))
    _write_csv(path("summary.csv"), ("dataset", "algorithm", "metric", "mean", "std", "count"),
               summarize_records(records))
    by_fraction = summarize_records(records, by_fraction=True)
    _write_csv(path("summary_by_fraction.csv"),
               ("dataset", "algorithm", "fraction", "metric", "mean", "std", "count"), by_fraction)
    for metric in METRICS:
        _write_csv(path(f"curves_{metric}.csv"),
                   ("dataset", "algorithm", "fraction", "mean", "std"),
                   (row[:3] + row[4:6] for row in by_fraction if row[3] == metric))

    fits = {}
    for r in records:
        if r.history:
            fits.setdefault((r.dataset, r.algorithm, r.seed, r.fold), r.history)
    if fits:
        os.makedirs(os.path.join(out_dir, "convergence"), exist_ok=True)
    for (ds, algo, seed, fold), hist in fits.items():
        name = f"{ds}_{algo}_seed{seed}_fold{fold}.csv".replace("[", "_").replace("]", "")
        _write_csv(path("convergence", name), ("iteration", "objective"), enumerate(hist))

    sweep = [r for r in records if r.algorithm.startswith("mfsir[")]
    if sweep:
        rows = []
        for key, group in _group(sweep + [r for r in records if r.algorithm == "mfsir"],
                                 ("dataset", "alpha", "beta", "fraction")).items():
            for metric in METRICS:
                mean, std = mean_std([getattr(r, metric) for r in group])
                rows.append((*key, metric, mean, std))
        rows.sort(key=lambda row: tuple(str(x) for x in row[:5]))
        _write_csv(path("sensitivity.csv"),
                   ("dataset", "alpha", "beta", "fraction", "metric", "mean", "std"), rows)

    if plots:
        written += _plot_curves(by_fraction, out_dir)
    return written


def _plot_curves(by_fraction, out_dir) -> list[str]:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping plots")
        return []
    paths = []
    for ds in sorted({row[0] for row in by_fraction}):
        for metric in METRICS:
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for algo in sorted({row[1] for row in by_fraction if row[0] == ds}):
                pts = sorted((row[2], row[4]) for row in by_fraction
                             if row[0] == ds and row[1] == algo and row[3] == metric)
                ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=algo)
            ax.set_xlabel("fraction of selected features")
            ax.set_ylabel(metric)
            ax.set_title(ds)
            ax.legend(fontsize="small")
            p = os.path.join(out_dir, f"curve_{ds}_{metric}.svg")
            fig.savefig(p)
            plt.close(fig)
            paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# comparison

@dataclass
class CompareReport:
    table: stats.MetricTable
    avg_ranks: np.ndarray
    chi2_f: float
    f_f: float
    df1: int
    df2: int
    cd: float | None
    significant: np.ndarray
    perfect_separation: bool = False

    def format(self) -> str:
        t = self.table
        lines = [f"datasets: {len(t.dataset_names)}  algorithms: {len(t.algorithm_names)}"
                 f"  ({'higher' if t.higher_is_better else 'lower'} is better)",
                 "average ranks:"]
        for name, r in sorted(zip(t.algorithm_names, self.avg_ranks), key=lambda x: x[1]):
            lines.append(f"  {name:<24s} {r:.4f}")
        lines.append(f"chi2_F = {self.chi2_f:.4f}")
        if self.perfect_separation:
            lines.append("F_F undefined: perfect separation (identical ranking on every dataset)")
        else:
            lines.append(f"F_F = {self.f_f:.4f}  (df = {self.df1}, {self.df2})")
        if self.cd is None:
            lines.append("CD: no tabulated q_alpha for this many algorithms")
        else:
            lines.append(f"CD = {self.cd:.4f}")
            names = t.algorithm_names
            pairs = [f"  {names[i]} vs {names[j]}"
                     for i in range(len(names)) for j in range(i + 1, len(names))
                     if self.significant[i, j]]
            lines.append("significant pairs:" if pairs else "significant pairs: none")
            lines += pairs
        return "\n".join(lines)


def metric_table_from_results(rows: Sequence[dict], metric: str,
                              higher_is_better: bool) -> stats.MetricTable:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    sums: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        if row.get("status", "ok") != "ok" or math.isnan(row[metric]):
            continue
        sums.setdefault((row["dataset"], row["algorithm"]), []).append(row[metric])
    algorithms = sorted({a for _, a in sums})
    datasets = sorted({d for d, _ in sums})
    complete = [d for d in datasets if all((d, a) in sums for a in algorithms)]
    if len(algorithms) < 2 or len(complete) < 2:
        raise CoverageError(f"need >= 2 algorithms on >= 2 datasets, found "
                            f"{len(algorithms)} algorithms and {len(complete)} complete datasets")
    values = [[float(np.mean(sums[(d, a)])) for a in algorithms] for d in complete]
    return stats.MetricTable(np.array(values), higher_is_better, tuple(algorithms), tuple(complete))


def compare(rows: Sequence[dict], metric: str, higher_is_better: bool | None = None,
            q_alpha: float | None = None) -> CompareReport:
    if higher_is_better is None:
        higher_is_better = not LOWER_IS_BETTER[metric]
    table = metric_table_from_results(rows, metric, higher_is_better)
    theta, gamma = table.values.shape
    try:
        fr = stats.friedman(table)
        ranks, chi2, f_f, perfect = fr.avg_ranks, fr.chi2_f, fr.f_f, False
    except stats.PerfectSeparation as exc:
        ranks, chi2, f_f, perfect = exc.avg_ranks, exc.chi2_f, math.inf, True
    try:
        cd = stats.nemenyi_cd(gamma, theta, q_alpha)
        sig = stats.pairwise_significance(ranks, cd)
    except ValueError:
        cd, sig = None, np.zeros((gamma, gamma), dtype=bool)
    return CompareReport(table, ranks, chi2, f_f, gamma - 1, (gamma - 1) * (theta - 1),
                         cd, sig, perfect)


def write_cd_diagram(report: CompareReport, out_dir, metric: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    p1 = os.path.join(out_dir, f"cd_diagram_{metric}.csv")
    _write_csv(p1, ("algorithm", "avg_rank"), zip(report.table.algorithm_names,
                                                 map(float, report.avg_ranks)))
    p2 = os.path.join(out_dir, f"cd_{metric}.csv")
    theta, gamma = report.table.values.shape
    _write_csv(p2, ("cd", "gamma", "theta", "chi2_f", "f_f"),
               [(report.cd if report.cd is not None else math.nan, gamma, theta,
                 float(report.chi2_f), float(report.f_f))])
    return [p1, p2]
