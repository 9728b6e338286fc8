"""Command-line entry point: ``ucsl {generate,fit,predict,benchmark}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import benchmark as bench
from .clustering import ClusteringMethod
from .data import (
    ToyConfig,
    ToyConfigId,
    generate_toy,
    load_csv,
    load_idx,
    one_vs_rest,
    write_csv,
)
from .em import NegativeWeighting, UcslConfig, UcslModel, fit
from .errors import DimensionMismatchError, UcslError
from .estimators import EstimatorKind
from .metrics import adjusted_rand_index, balanced_accuracy, cluster_balanced_accuracy, v_measure

SCHEMA_VERSION = 1
log = logging.getLogger("ucsl")


def _add_ucsl_flags(p):
    p.add_argument("--k", type=int, default=2, help="number of latent clusters")
    p.add_argument("--clustering", choices=[m.value for m in ClusteringMethod], default="gmm")
    p.add_argument("--classifier", choices=[k.value for k in EstimatorKind], default="logistic")
    p.add_argument("--ensembles", type=int, default=None)
    p.add_argument("--negative-weighting", choices=[w.value for w in NegativeWeighting],
                   default=NegativeWeighting.POSTERIOR_EXTENSION.value)
    p.add_argument("--stop-ari", type=float, default=0.85)
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument("--regularization", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


def _ucsl_config(args) -> UcslConfig:
    return UcslConfig(
        n_clusters=args.k,
        n_ensembles=args.ensembles if args.ensembles is not None else 10,
        max_em_iter=args.max_iter,
        stop_ari=args.stop_ari,
        clustering_method=args.clustering,
        estimator_kind=args.classifier,
        negative_weighting=args.negative_weighting,
        regularization=args.regularization,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ucsl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic toy dataset as CSV")
    g.add_argument("--config", choices=[c.value for c in ToyConfigId])
    g.add_argument("--from-json", help="ToyConfig JSON document (overrides the other flags)")
    g.add_argument("--n", type=int, default=250, help="samples per positive cluster")
    g.add_argument("--noise-dims", type=int, default=0)
    g.add_argument("--separation", type=float, default=5.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit a UCSL model")
    f.add_argument("--data", help="CSV dataset")
    f.add_argument("--label-column", default="y")
    f.add_argument("--subtype-column", default=None,
                   help="ground-truth subtype column (default: 'subtype' when present)")
    f.add_argument("--idx-images")
    f.add_argument("--idx-labels")
    f.add_argument("--positive-class", type=int, default=7)
    f.add_argument("--downsample", type=int, default=None)
    f.add_argument("--take-first", type=int, default=None)
    _add_ucsl_flags(f)
    f.add_argument("--jobs", type=int, default=None, help="worker processes (default $UCSL_THREADS or 1)")
    f.add_argument("--out", required=True, help="model JSON path")
    f.add_argument("--metrics-out", default=None, help="metrics JSON path (default <out>.metrics.json)")

    p = sub.add_parser("predict", help="apply a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", default="y")
    p.add_argument("--subtype-column", default="subtype")
    p.add_argument("--out", required=True)

    b = sub.add_parser("benchmark", help="noise-robustness sweep over the toy configurations")
    b.add_argument("--experiment", help="ExperimentConfig JSON file")
    b.add_argument("--configs", nargs="+", choices=[c.value for c in ToyConfigId])
    b.add_argument("--noise-dims", nargs="+", type=int)
    b.add_argument("--seeds", nargs="+", type=int)
    b.add_argument("--methods", nargs="+", choices=list(bench.METHODS))
    b.add_argument("--n", type=int, default=None)
    b.add_argument("--separation", type=float, default=None)
    b.add_argument("--ensembles", type=int, default=None, help="ignored: the sweep never ensembles")
    b.add_argument("--jobs", type=int, default=None)
    b.add_argument("--out", default=None, help="output directory")
    return parser


def cmd_generate(args) -> int:
    if args.from_json:
        with open(args.from_json, encoding="utf-8") as fh:
            cfg = ToyConfig.from_json(fh.read())
    else:
        if not args.config:
            raise SystemExit("generate: --config or --from-json is required")
        cfg = ToyConfig(args.config, args.n, args.noise_dims, args.separation, args.seed)
    write_csv(generate_toy(cfg), args.out)
    return 0


def _load_training(args):
    if args.idx_images or args.idx_labels:
        if not (args.idx_images and args.idx_labels):
            raise SystemExit("fit: --idx-images and --idx-labels go together")
        ds = one_vs_rest(load_idx(args.idx_images, args.idx_labels, args.downsample, args.take_first),
                         args.positive_class)
        return ds, False
    if not args.data:
        raise SystemExit("fit: --data or --idx-images/--idx-labels is required")
    sub = args.subtype_column
    if sub is None:
        with open(args.data, newline="", encoding="utf-8") as fh:
            header = [h.strip() for h in next(csv.reader(fh), [])]
        sub = "subtype" if "subtype" in header else None
    return load_csv(args.data, args.label_column, sub), sub is not None


def cmd_fit(args) -> int:
    ds, has_subtypes = _load_training(args)
    config = _ucsl_config(args)
    model = fit(ds.features, ds.labels, config, n_jobs=args.jobs)
    model.save(args.out)

    metrics = {
        "schema_version": SCHEMA_VERSION,
        "n_samples": ds.n_samples,
        "n_features": ds.n_features,
        "n_clusters": config.n_clusters,
        "cluster_model": model.cluster_model.kind.value,
        "n_em_iters_run": model.n_em_iters_run,
        "member_iters": list(model.member_iters),
        "member_converged": list(model.member_converged),
        "n_failed_members": model.n_failed_members,
        "cluster_sizes": np.bincount(model.consensus_labels, minlength=config.n_clusters).tolist(),
    }
    if not config.is_regression:
        metrics["train_balanced_accuracy"] = balanced_accuracy(ds.labels, model.predict(ds.features))
    if has_subtypes:
        mask = np.ones(ds.n_samples, bool) if config.is_regression else ds.labels == 1
        truth = ds.subtype_truth[mask]
        metrics["ari"] = adjusted_rand_index(truth, model.consensus_labels)
        metrics["v_measure"] = v_measure(truth, model.consensus_labels)
        metrics["cluster_balanced_accuracy"] = cluster_balanced_accuracy(truth, model.consensus_labels)
    with open(args.metrics_out or args.out + ".metrics.json", "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=1)
    return 0


def _read_prediction_features(path, label_column, subtype_column):
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh))]
    if label_column in header:
        sub = subtype_column if subtype_column in header else None
        ds = load_csv(path, label_column, sub)
        return ds.features, ds.labels
    # no label column: every column is a feature
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data, None


def cmd_predict(args) -> int:
    model = UcslModel.load(args.model)
    X, y = _read_prediction_features(args.data, args.label_column, args.subtype_column)
    if X.shape[1] != model.n_features:
        raise DimensionMismatchError(model.n_features, X.shape[1])
    clusters = model.predict_cluster(X)
    if model.config.is_regression:
        column, values = "y_hat", model.predict(X)
    else:
        column, values = "p_y", model.predict_proba(X)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([column, "cluster"])
        for v, c in zip(values, clusters):
            w.writerow([repr(float(v)), int(c)])
    return 0


def cmd_benchmark(args) -> int:
    if args.experiment:
        with open(args.experiment, encoding="utf-8") as fh:
            exp = bench.ExperimentConfig.from_json(fh.read())
    else:
        exp = bench.ExperimentConfig()
    overrides = {k: v for k, v in {
        "configs": args.configs, "noise_dims": args.noise_dims, "seeds": args.seeds,
        "methods": args.methods, "n_per_cluster": args.n, "separation": args.separation,
        "out_dir": args.out}.items() if v is not None}
    exp = replace(exp, **overrides)
    if args.ensembles is not None:
        log.warning("--ensembles is ignored by benchmark: runs are single EM chains without ensembling")
    rows = bench.run_benchmark(exp, n_jobs=args.jobs)
    paths = bench.write_reports(rows, exp, exp.out_dir)
    failed = sum(1 for r in rows if r["error"])
    if failed:
        log.warning("%d of %d benchmark cells failed; see %s", failed, len(rows), paths["runs"])
    for r in bench.summarize(rows):
        if r["mean_ari"] is not None:
            print(f"{r['config']:>18} noise={r['noise_dims']:<3} {r['method']:<13} "
                  f"ARI {r['mean_ari']:.3f} +/- {r['std_ari']:.3f}")
    return 0


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "predict": cmd_predict, "benchmark": cmd_benchmark}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UcslError, OSError, ValueError) as exc:
        print(f"ucsl {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
