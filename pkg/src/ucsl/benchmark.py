"""Noise-robustness sweep over the toy geometries, with CSV/JSON/SVG reports.

Every method sees the same generated dataset per (config, noise_dims, seed).
UCSL runs a single EM chain (no ensembling) and the baselines use one
initialisation, so all methods are compared under the same restart budget.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np

from .clustering import fit_gmm, fit_kmeans
from .data import ToyConfig, ToyConfigId, generate_toy
from .em import NegativeWeighting, UcslConfig, run_em_once
from .errors import UcslError
from .metrics import adjusted_rand_index

SCHEMA_VERSION = 1
METHODS = ("ucsl", "ucsl-uniform", "kmeans", "gmm")


@dataclass
class ExperimentConfig:
    configs: List[str] = field(default_factory=lambda: [c.value for c in ToyConfigId])
    noise_dims: List[int] = field(default_factory=lambda: [0, 5, 10, 20])
    seeds: List[int] = field(default_factory=lambda: list(range(10)))
    methods: List[str] = field(default_factory=lambda: list(METHODS))
    n_per_cluster: int = 250
    separation: float = 5.0
    ucsl: dict = field(default_factory=dict)
    out_dir: str = "benchmark_out"

    def __post_init__(self):
        if not self.configs or not self.noise_dims or not self.seeds or not self.methods:
            raise ValueError("configs, noise_dims, seeds and methods must be non-empty")
        for c in self.configs:
            ToyConfigId(c)
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))


def run_cell(config_id: str, noise_dims: int, method: str, seed: int,
             n_per_cluster: int, separation: float, ucsl_overrides: dict) -> dict:
    ds = generate_toy(ToyConfig(config_id, n_per_cluster, noise_dims, separation, seed))
    pos = ds.labels == 1
    truth = ds.subtype_truth[pos]
    K = len(np.unique(truth))
    row = {"config": config_id, "noise_dims": noise_dims, "method": method, "seed": seed,
           "ari": float("nan"), "error": ""}
    try:
        if method.startswith("ucsl"):
            weighting = NegativeWeighting.UNIFORM if method == "ucsl-uniform" else NegativeWeighting.POSTERIOR_EXTENSION
            opts = {**ucsl_overrides, "n_clusters": K, "n_ensembles": 1, "negative_weighting": weighting}
            labels = run_em_once(ds.features, ds.labels, UcslConfig(**opts), seed).labels
        elif method == "kmeans":
            labels = fit_kmeans(ds.features[pos], K, seed=seed, n_init=1).predict(ds.features[pos])
        else:
            labels = fit_gmm(ds.features[pos], K, seed=seed, n_init=1).predict(ds.features[pos])
        row["ari"] = adjusted_rand_index(truth, labels)
    except (UcslError, np.linalg.LinAlgError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _cell(args):
    return run_cell(*args)


def run_benchmark(exp: ExperimentConfig, n_jobs: Optional[int] = None) -> list:
    tasks = [
        (c, nd, m, s, exp.n_per_cluster, exp.separation, exp.ucsl)
        for c in exp.configs for nd in exp.noise_dims for m in exp.methods for s in exp.seeds
    ]
    jobs = n_jobs if n_jobs is not None else int(os.environ.get("UCSL_THREADS", "1") or 1)
    if jobs <= 1:
        return [_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_cell, tasks))


def summarize(rows: list) -> list:
    out = {}
    for r in rows:
        out.setdefault((r["config"], r["noise_dims"], r["method"]), []).append(r)
    results = []
    for (cfg, nd, method), runs in out.items():
        aris = np.array([r["ari"] for r in runs], dtype=float)
        good = aris[np.isfinite(aris)]
        results.append({
            "config": cfg,
            "noise_dims": nd,
            "method": method,
            "mean_ari": float(good.mean()) if len(good) else None,
            "std_ari": float(good.std()) if len(good) else None,
            "n_failed": int(len(aris) - len(good)),
            "runs": [{"seed": r["seed"], "ari": None if math.isnan(r["ari"]) else r["ari"],
                      "error": r["error"]} for r in runs],
        })
    return results


def write_runs_csv(rows: list, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, ["config", "noise_dims", "method", "seed", "ari", "error"], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({**r, "ari": "" if math.isnan(r["ari"]) else repr(r["ari"])})


def write_summary_json(results: list, exp: ExperimentConfig, path) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "experiment": asdict(exp), "results": results}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


_COLORS = {"ucsl": "#d62728", "ucsl-uniform": "#ff9896", "kmeans": "#1f77b4", "gmm": "#2ca02c"}


def render_svg(results: list, exp: ExperimentConfig) -> str:
    """Mean ARI vs. noise dims, one panel per configuration, raw-std bands."""
    pw, ph, m = 260, 200, 40
    width = m + len(exp.configs) * (pw + m)
    height = ph + 2 * m + 30
    xs = sorted(set(exp.noise_dims))
    xmax = max(xs) if max(xs) > min(xs) else min(xs) + 1
    xmin = min(xs)

    def px(i, x):
        return m + i * (pw + m) + (x - xmin) / (xmax - xmin) * pw

    def py(v):
        v = min(max(v, -0.2), 1.0)
        return m + (1.0 - v) / 1.2 * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="11">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    lookup = {(r["config"], r["noise_dims"], r["method"]): r for r in results}
    for i, cfg in enumerate(exp.configs):
        x0, x1 = px(i, xmin), px(i, xmax)
        parts.append(f'<text x="{x0:.1f}" y="{m - 12}" font-weight="bold">{cfg}</text>')
        parts.append(f'<rect x="{x0:.1f}" y="{m}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>')
        for tick in (0.0, 0.5, 1.0):
            parts.append(f'<line x1="{x0:.1f}" x2="{x1:.1f}" y1="{py(tick):.1f}" y2="{py(tick):.1f}" '
                         f'stroke="#ddd"/><text x="{x0 - 28:.1f}" y="{py(tick) + 4:.1f}">{tick:.1f}</text>')
        for x in xs:
            parts.append(f'<text x="{px(i, x) - 4:.1f}" y="{m + ph + 14}">{x}</text>')
        parts.append(f'<text x="{x0 + pw / 2 - 30:.1f}" y="{m + ph + 28}">noise dims</text>')
        for method in exp.methods:
            pts = [(x, lookup.get((cfg, x, method))) for x in xs]
            pts = [(x, r) for x, r in pts if r and r["mean_ari"] is not None]
            if not pts:
                continue
            color = _COLORS.get(method, "#444")
            upper = [f"{px(i, x):.1f},{py(r['mean_ari'] + r['std_ari']):.1f}" for x, r in pts]
            lower = [f"{px(i, x):.1f},{py(r['mean_ari'] - r['std_ari']):.1f}" for x, r in reversed(pts)]
            parts.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.15"/>')
            line = " ".join(f"{px(i, x):.1f},{py(r['mean_ari']):.1f}" for x, r in pts)
            parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
    for j, method in enumerate(exp.methods):
        lx = m + j * 120
        ly = height - 10
        parts.append(f'<rect x="{lx}" y="{ly - 9}" width="12" height="4" fill="{_COLORS.get(method, "#444")}"/>'
                     f'<text x="{lx + 16}" y="{ly - 4}">{method}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_reports(rows: list, exp: ExperimentConfig, out_dir) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    results = summarize(rows)
    paths = {
        "runs": os.path.join(out_dir, "runs.csv"),
        "summary": os.path.join(out_dir, "summary.json"),
        "chart": os.path.join(out_dir, "chart.svg"),
    }
    write_runs_csv(rows, paths["runs"])
    write_summary_json(results, exp, paths["summary"])
    with open(paths["chart"], "w", encoding="utf-8") as fh:
        fh.write(render_svg(results, exp))
    return paths
