#!/usr/bin/env python
"""Optimal perplexity against the raw data vs. against the signal.

Example::

    python scripts/ordering_experiment.py links --noise-sd 1 --step 10 --repeats 10
"""

from __future__ import annotations

import argparse
import json
import time
import warnings

import numpy as np

from noisydr.datagen import embed_and_noise, generate_gaussian_clusters, generate_links, generate_trefoil
from noisydr.sweep import SweepConfig, run_sweep
from noisydr.tsne import TsneSettings

DEFAULT_SD = {"links": 1.0, "trefoil": 10.0, "clusters": 3.0}


def make_bundle(name: str, noise_sd: float, seed: int):
    if name == "links":
        Y, labels = generate_links(250)
        return embed_and_noise(Y, 10, noise_sd, seed, labels)
    if name == "trefoil":
        return embed_and_noise(generate_trefoil(500), 10, noise_sd, seed)
    Y, labels = generate_gaussian_clusters(seed=seed)
    return embed_and_noise(Y, 60, noise_sd, seed, labels)


def sweep(name, noise_sd, seed, step=10, repeats=10, k=10, stop=150, workers=1, settings=None):
    bundle = make_bundle(name, noise_sd, seed)
    config = SweepConfig(
        grid=tuple(float(p) for p in range(10, stop + 1, step)),
        repeats=repeats,
        k=k,
        base_seed=seed,
        workers=workers,
        settings=settings or TsneSettings(),
    )
    return run_sweep(bundle.observed, config, signal_Y=bundle.signal_Y)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[1])
    ap.add_argument("dataset", choices=sorted(DEFAULT_SD))
    ap.add_argument("--noise-sd", type=float)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--step", type=int, default=10)
    ap.add_argument("--stop", type=int, default=150)
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--json", help="write the summary here")
    args = ap.parse_args()

    sd = DEFAULT_SD[args.dataset] if args.noise_sd is None else args.noise_sd
    warnings.simplefilter("ignore")
    t0 = time.perf_counter()
    res = sweep(args.dataset, sd, args.seed, args.step, args.repeats, args.k, args.stop, args.workers)
    print(f"{'perplexity':>10} {'trust_raw':>10} {'trust_sig':>10} {'shep_raw':>9} {'shep_sig':>9}")
    for row in res.summary.per_perplexity:
        print(
            f"{row['perplexity']:>10g} {row['mean_trust_raw']:>10.4f} {row['mean_trust_signal']:>10.4f} "
            f"{row['mean_shep_raw']:>9.3f} {row['mean_shep_signal']:>9.3f}"
        )
    s = res.summary
    print(f"optimal vs raw: {s.optimal_vs_raw:g}   optimal vs signal: {s.optimal_vs_signal:g}   "
          f"({time.perf_counter() - t0:.0f} s)")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"dataset": args.dataset, "noise_sd": sd, "seed": args.seed,
                       "optimal_vs_raw": s.optimal_vs_raw, "optimal_vs_signal": s.optimal_vs_signal,
                       "per_perplexity": s.per_perplexity}, fh, indent=2)


if __name__ == "__main__":
    main()
