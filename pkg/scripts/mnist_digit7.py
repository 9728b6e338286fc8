"""Digit-7 subtype discovery on MNIST (14x14, one-vs-rest, K=2).

Fits UCSL under several master seeds and reports member convergence,
cluster balance and cross-seed agreement of the final labels.

    python3 scripts/mnist_digit7.py                        # bundled 10k digits in data/
    python3 scripts/mnist_digit7.py --images train-images-idx3-ubyte.gz \
        --labels train-labels-idx1-ubyte.gz --take-first 20000
"""
import argparse
import itertools
import json
import time
from pathlib import Path

import numpy as np

from ucsl.data import load_idx, one_vs_rest
from ucsl.em import UcslConfig, fit
from ucsl.metrics import adjusted_rand_index

DATA = Path(__file__).resolve().parents[1] / "data"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", default=str(DATA / "mnist10k-images-idx3-ubyte.gz"))
    ap.add_argument("--labels", default=str(DATA / "mnist10k-labels-idx1-ubyte.gz"))
    ap.add_argument("--take-first", type=int, default=None)
    ap.add_argument("--digit", type=int, default=7)
    ap.add_argument("--seeds", nargs="+", type=int, default=[0, 1000])
    ap.add_argument("--regularization", type=float, default=1.0)
    ap.add_argument("--ensembles", type=int, default=10)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--out", default=None, help="optional JSON report path")
    args = ap.parse_args(argv)

    ds = one_vs_rest(load_idx(args.images, args.labels, downsample=14, take_first=args.take_first), args.digit)
    print(f"{ds.n_samples} digits, {int((ds.labels == 1).sum())} positives, d={ds.n_features}")
    runs = []
    for seed in args.seeds:
        t0 = time.perf_counter()
        cfg = UcslConfig(seed=seed, n_ensembles=args.ensembles, regularization=args.regularization)
        model = fit(ds.features, ds.labels, cfg, n_jobs=args.jobs)
        sizes = np.bincount(model.consensus_labels, minlength=2)
        runs.append({"seed": seed, "seconds": time.perf_counter() - t0,
                     "member_iters": list(model.member_iters),
                     "n_converged": int(sum(model.member_converged)),
                     "cluster_sizes": sizes.tolist(), "labels": model.consensus_labels})
        print(f"seed {seed}: {runs[-1]['seconds']:.0f}s, converged {runs[-1]['n_converged']}/{args.ensembles}, "
              f"iters {model.member_iters}, cluster sizes {sizes.tolist()}")
    pairs = {f"{a['seed']}-{b['seed']}": adjusted_rand_index(a["labels"], b["labels"])
             for a, b in itertools.combinations(runs, 2)}
    for k, v in pairs.items():
        print(f"cross-seed ARI {k}: {v:.3f}")
    if args.out:
        for r in runs:
            r.pop("labels")
        with open(args.out, "w") as fh:
            json.dump({"schema_version": 1, "runs": runs, "cross_seed_ari": pairs}, fh, indent=1)


if __name__ == "__main__":
    main()
