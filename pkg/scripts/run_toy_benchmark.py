"""Noise sweep over the four toy geometries: UCSL (both negative weightings) vs k-means and GMM.

    python3 scripts/run_toy_benchmark.py --out benchmark_out
    UCSL_THREADS=4 python3 scripts/run_toy_benchmark.py --noise-dims 0 20 --seeds 0 1 2

Writes runs.csv, summary.json and chart.svg to ``--out``.
"""
import argparse

from ucsl import benchmark as bench


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="benchmark_out")
    ap.add_argument("--noise-dims", nargs="+", type=int, default=[0, 5, 10, 20])
    ap.add_argument("--seeds", nargs="+", type=int, default=list(range(10)))
    ap.add_argument("--separation", type=float, default=5.0)
    ap.add_argument("--n", type=int, default=250)
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args(argv)

    exp = bench.ExperimentConfig(noise_dims=args.noise_dims, seeds=args.seeds, separation=args.separation,
                                 n_per_cluster=args.n, out_dir=args.out)
    rows = bench.run_benchmark(exp, n_jobs=args.jobs)
    bench.write_reports(rows, exp, args.out)
    print(f"{'config':>18} {'noise':>5} " + " ".join(f"{m:>13}" for m in exp.methods))
    table = {(r["config"], r["noise_dims"], r["method"]): r for r in bench.summarize(rows)}
    for c in exp.configs:
        for nd in exp.noise_dims:
            cells = []
            for m in exp.methods:
                r = table[(c, nd, m)]
                cells.append(f"{r['mean_ari']:.3f}+/-{r['std_ari']:.3f}" if r["mean_ari"] is not None else "failed")
            print(f"{c:>18} {nd:>5} " + " ".join(f"{s:>13}" for s in cells))


if __name__ == "__main__":
    main()
