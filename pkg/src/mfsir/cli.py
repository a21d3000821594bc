"""Command-line entry point: ``mfsir run|rank|evaluate|compare|summarize``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import experiment as ex
from .dataset import (DatasetError, DatasetSummary, kfold_split, load_dataset, select_features,
                      standardize, summarize)
from .estimator import DivergenceError, MfsirConfig, fit, laplacian_for
from .graph import build_laplacian, build_similarity, dump_graph
from .metrics import evaluate
from .mlknn import mlknn_fit, mlknn_predict

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("mfsir")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_mfsir_options(p):
    d = MfsirConfig()
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--eta", type=float, default=d.eta)
    p.add_argument("--varpi", type=float, default=d.varpi)
    p.add_argument("--latent-dim", type=int, default=None)
    p.add_argument("--tmax", type=int, default=d.t_max)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--init-mode", choices=("sparse_nonneg", "signed"), default=d.init_mode)
    p.add_argument("--graph-p", type=int, default=d.graph_p)
    p.add_argument("--graph-lambda", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfsir", description="Multi-label feature selection benchmark.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="cross-validated feature-fraction sweep from a config file")
    run.add_argument("--config", required=True)
    for key in ex.CONFIG_KEYS:
        run.add_argument(f"--{key}", dest=f"cfg_{key}", default=None, metavar="VALUE",
                         help=argparse.SUPPRESS)

    rank = sub.add_parser("rank", help="fit the estimator on a dataset and print the ranking")
    rank.add_argument("--dataset", required=True)
    rank.add_argument("--labels", required=True)
    _add_mfsir_options(rank)
    rank.add_argument("--no-standardize", action="store_true")
    rank.add_argument("--out", help="ranking CSV (default: stdout)")
    rank.add_argument("--model-dir", help="dump G, H, V, B and history CSVs here")
    rank.add_argument("--dump-graph", metavar="DIR", help="dump S and L CSVs here")

    ev = sub.add_parser("evaluate", help="cross-validate ML-kNN on a fixed feature ranking")
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--labels", required=True)
    ev.add_argument("--ranking", required=True, help="CSV written by 'mfsir rank'")
    ev.add_argument("--fractions", default=",".join(map(str, ex.DEFAULT_FRACTIONS)))
    ev.add_argument("--cv-folds", type=int, default=5)
    ev.add_argument("--knn-k", type=int, default=10)
    ev.add_argument("--knn-s", type=float, default=1.0)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--algorithm", default="ranking")
    ev.add_argument("--no-standardize", action="store_true")
    ev.add_argument("--out", help="metrics CSV (default: stdout)")

    cmp_ = sub.add_parser("compare", help="Friedman / Nemenyi comparison of a results.csv")
    cmp_.add_argument("--results", required=True)
    cmp_.add_argument("--metric", choices=ex.METRICS, required=True)
    cmp_.add_argument("--direction", choices=("min", "max"), default=None,
                      help="min: lower is better (default depends on the metric)")
    cmp_.add_argument("--q-alpha", type=float, default=None)
    cmp_.add_argument("--out-dir", help="write CD-diagram CSVs here")

    sm = sub.add_parser("summarize", help="print name,n,m,q,lcard,lden")
    sm.add_argument("arff")
    sm.add_argument("xml")
    return parser


def _cmd_run(args) -> int:
    overrides = {key: getattr(args, f"cfg_{key}") for key in ex.CONFIG_KEYS
                 if getattr(args, f"cfg_{key}") is not None}
    try:
        cfg = ex.load_config(args.config, overrides)
    except (ex.ConfigError, OSError) as exc:
        raise UsageError(str(exc)) from None
    if not cfg.datasets:
        raise UsageError("config lists no datasets")
    records = ex.run_experiment(cfg)
    failed = sum(r.status != "ok" for r in records)
    paths = ex.emit_outputs(records, cfg.output_dir, plots=cfg.plots)
    print(f"{len(records)} records ({failed} failed) -> {cfg.output_dir} ({len(paths)} files)")
    return EXIT_OK


def _write_matrix(path, M):
    np.savetxt(path, M, delimiter=",", fmt="%.17g")


def _cmd_rank(args) -> int:
    d = load_dataset(args.dataset, args.labels)
    if not args.no_standardize:
        d, _ = standardize(d)
    try:
        cfg = MfsirConfig(alpha=args.alpha, beta=args.beta, eta=args.eta, varpi=args.varpi,
                          latent_dim=args.latent_dim, t_max=args.tmax, tol=args.tol,
                          seed=args.seed, init_mode=args.init_mode, graph_p=args.graph_p,
                          graph_lambda=args.graph_lambda)
        cfg.resolve_latent_dim(d.q)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.dump_graph:
        g = build_similarity(d.X, min(cfg.graph_p, d.n - 1), cfg.graph_lambda)
        dump_graph(g, build_laplacian(g), args.dump_graph)
    model, ranking = fit(d.X, d.Y, cfg, L=laplacian_for(d.X, cfg))

    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("rank", "feature_index", "feature_name", "score"))
        for r, j in enumerate(ranking.order, 1):
            w.writerow((r, int(j), d.feature_names[j], repr(float(ranking.scores[j]))))
    finally:
        if args.out:
            out.close()

    if args.model_dir:
        os.makedirs(args.model_dir, exist_ok=True)
        for name in "GHVB":
            _write_matrix(os.path.join(args.model_dir, f"{name}.csv"), getattr(model, name))
        with open(os.path.join(args.model_dir, "history.csv"), "w", encoding="utf-8") as fh:
            fh.write("iteration,objective\n")
            for t, v in enumerate(model.objective_history):
                fh.write(f"{t},{v!r}\n")
    log.info("%d iterations, converged=%s", model.iterations_run, model.converged)
    return EXIT_OK


def read_ranking(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "feature_index" not in rows[0]:
        raise DatasetError(f"{path}: not a ranking CSV")
    rows.sort(key=lambda r: int(r["rank"]))
    return np.array([int(r["feature_index"]) for r in rows])


def _cmd_evaluate(args) -> int:
    d = load_dataset(args.dataset, args.labels)
    order = read_ranking(args.ranking)
    if sorted(order.tolist()) != list(range(d.m)):
        raise DatasetError("ranking does not cover exactly the dataset's features")
    try:
        fractions = ex._tuple(float)(args.fractions)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    folds = kfold_split(d.n, args.cv_folds, args.seed)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("dataset", "algorithm", "fraction", "fold", "hl", "rl", "mauc", "mf1",
                    "skipped_i", "skipped_l"))
        for fold in range(args.cv_folds):
            tr, te = folds.train_test(fold)
            train, test = d.subset(tr), d.subset(te)
            if not args.no_standardize:
                train, scaler = standardize(train)
                test = scaler.apply(test)
            for fraction in fractions:
                top = order[:ex.n_selected(fraction, d.m)]
                model = mlknn_fit(select_features(train, top), args.knn_k, args.knn_s)
                scores, pred = mlknn_predict(model, test.X[:, top])
                res = evaluate(pred, scores, test.Y)
                w.writerow((d.name, args.algorithm, fraction, fold,
                            *(ex._fmt(v) for v in (res.hamming_loss, res.ranking_loss,
                                                   res.macro_auc, res.macro_f1)),
                            res.skipped_instances, res.skipped_labels))
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def _cmd_compare(args) -> int:
    rows = ex.read_results(args.results)
    higher = None if args.direction is None else args.direction == "max"
    report = ex.compare(rows, args.metric, higher, args.q_alpha)
    print(report.format())
    if args.out_dir:
        ex.write_cd_diagram(report, args.out_dir, args.metric)
    return EXIT_OK


def _cmd_summarize(args) -> int:
    s = summarize(load_dataset(args.arff, args.xml))
    print(DatasetSummary.CSV_HEADER)
    print(s.csv_row())
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "rank": _cmd_rank, "evaluate": _cmd_evaluate,
            "compare": _cmd_compare, "summarize": _cmd_summarize}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mfsir: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, ex.CoverageError, FileNotFoundError, IndexError) as exc:
        print(f"mfsir: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, FloatingPointError) as exc:
        print(f"mfsir: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
