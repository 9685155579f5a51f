"""Command-line interface.

Subcommands::

    noisydr generate {links,trefoil,mammoth,clusters} [options] --out-dir DIR
    noisydr sweep CONFIG.json [--out-dir DIR] [--workers N] [...]
    noisydr eval OBSERVED EMBEDDING (--r R | --signal FILE) [--k K] [...]
    noisydr scree OBSERVED [--max-components N] [--out FILE] [--svg FILE]

Worker count for ``sweep``: ``--workers`` wins; otherwise the config key
``workers`` or the environment variable ``NOISYDR_WORKERS`` (setting both is
rejected); otherwise 1. Other sweep flags override the matching config keys.

Exit status: 0 success, 2 usage/parameter error, 3 ingestion/data error,
4 run error (including a sweep whose summary is invalid).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from noisydr import datagen, plots
from noisydr.errors import DataError, IngestionError, ParameterError, RunError
from noisydr.matrix_io import read_labels, read_matrix, write_labels, write_matrix
from noisydr.signal_model import fit_pca
from noisydr.sweep import SweepConfig, evaluate_external, run_sweep
from noisydr.tsne import TsneSettings

log = logging.getLogger("noisydr")

EXIT_OK, EXIT_USAGE, EXIT_INGEST, EXIT_RUN = 0, 2, 3, 4
SCHEMA_VERSION = 1
WORKERS_ENV = "NOISYDR_WORKERS"
RECORD_HEADER = "perplexity,repeat,seed,trust_raw,trust_signal,shep_raw,shep_signal,final_kl"

_TSNE_PROPS = {
    "n_iter": {"type": "integer", "minimum": 1},
    "learning_rate": {"type": "number", "exclusiveMinimum": 0},
    "momentum": {"type": "number"},
    "final_momentum": {"type": "number"},
    "momentum_switch_iter": {"type": "integer", "minimum": 0},
    "exaggeration": {"type": "number", "exclusiveMinimum": 0},
    "exaggeration_iters": {"type": "integer", "minimum": 0},
    "use_gains": {"type": "boolean"},
    "min_gain": {"type": "number", "minimum": 0},
    "init": {"enum": ["pca", "random"]},
    "init_scale": {"type": "number", "exclusiveMinimum": 0},
    "init_jitter": {"type": "number", "minimum": 0},
    "kl_every": {"type": "integer", "minimum": 1},
    "perplexity_tol": {"type": "number", "exclusiveMinimum": 0},
    "max_bisect_iter": {"type": "integer", "minimum": 1},
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["observed", "grid"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "observed": {"type": "string"},
        "signal": {"type": "string"},
        "signal_dim": {"type": "integer", "minimum": 1},
        "labels": {"type": "string"},
        "grid": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "step"],
                    "properties": {
                        "start": {"type": "number"},
                        "stop": {"type": "number"},
                        "step": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            ]
        },
        "repeats": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "subsample": {
            "type": "object",
            "additionalProperties": False,
            "required": ["m", "seed"],
            "properties": {"m": {"type": "integer", "minimum": 1}, "seed": {"type": "integer"}},
        },
        "aggregate": {"enum": ["mean", "max"]},
        "workers": {"type": "integer", "minimum": 1},
        "q": {"type": "integer", "minimum": 1},
        "tsne": {"type": "object", "additionalProperties": False, "properties": _TSNE_PROPS},
        "output_dir": {"type": "string"},
        "plots": {"type": "boolean"},
    },
}


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ------------------------------------------------------------------ generate


def cmd_generate(args) -> int:
    name = args.generator
    labels = None
    params: dict = {}
    if name == "links":
        Y, labels = datagen.generate_links(args.n_per_circle, args.seed)
        params = {"n_per_circle": args.n_per_circle}
    elif name == "trefoil":
        Y = datagen.generate_trefoil(args.n_points, args.seed)
        params = {"n_points": args.n_points}
    elif name == "mammoth":
        if not args.path:
            raise UsageError("mammoth needs --path to a 3-column point cloud file")
        Y = datagen.load_mammoth(args.path, args.n_subsample, args.seed)
        params = {"path": str(args.path), "n_subsample": args.n_subsample}
    else:
        Y, labels = datagen.generate_gaussian_clusters(
            args.clusters,
            args.points_per_cluster,
            args.dim,
            args.mean_scale,
            (args.cov_low, args.cov_high),
            args.seed,
        )
        params = {
            "clusters": args.clusters,
            "points_per_cluster": args.points_per_cluster,
            "dim": args.dim,
            "mean_scale": args.mean_scale,
            "cov_diag_range": [args.cov_low, args.cov_high],
        }

    bundle = datagen.embed_and_noise(Y, args.target_dim, args.noise_sd, args.seed, labels)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"signal": "signal.csv", "embedded": "embedded.csv", "observed": "observed.csv"}
    write_matrix(out / files["signal"], bundle.signal_Y)
    write_matrix(out / files["embedded"], bundle.embedded_Z)
    write_matrix(out / files["observed"], bundle.observed)
    if labels is not None:
        files["labels"] = "labels.csv"
        write_labels(out / files["labels"], labels)
    _write_json(
        out / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "generator": name,
            "params": params,
            "seed": args.seed,
            "noise_sd": args.noise_sd,
            "n": bundle.n,
            "signal_dim": bundle.r,
            "target_dim": bundle.p,
            "files": files,
        },
    )
    return EXIT_OK


# --------------------------------------------------------------------- sweep


def load_config(path: Path) -> dict:
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"{path}: cannot read config ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"{path}: config error at {where}: {exc.message}") from exc
    if "signal" not in cfg and "signal_dim" not in cfg:
        raise UsageError(f"{path}: config needs either 'signal' or 'signal_dim'")
    return cfg


def _grid(spec) -> list[float]:
    if isinstance(spec, list):
        return [float(g) for g in spec]
    start, stop, step = spec["start"], spec["stop"], spec["step"]
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [float(start + i * step) for i in range(max(count, 0))]


def _resolve_workers(flag, cfg) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(WORKERS_ENV)
    if env is not None and "workers" in cfg:
        raise UsageError(f"worker count set both in config and {WORKERS_ENV}; pick one")
    if env is not None:
        try:
            value = int(env)
        except ValueError as exc:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
        if value < 1:
            raise UsageError(f"{WORKERS_ENV} must be positive")
        return value
    return cfg.get("workers", 1)


def format_records(records) -> str:
    lines = [RECORD_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    _fmt(r.perplexity),
                    str(r.repeat_index),
                    str(r.seed),
                    _fmt(r.trust_vs_raw),
                    _fmt(r.trust_vs_signal),
                    _fmt(r.shepard_vs_raw),
                    _fmt(r.shepard_vs_signal),
                    _fmt(r.final_kl),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    cfg_path = Path(args.config)
    cfg = load_config(cfg_path)
    base = cfg_path.parent

    def rel(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    if args.repeats is not None:
        cfg["repeats"] = args.repeats
    if args.base_seed is not None:
        cfg["base_seed"] = args.base_seed
    if args.k is not None:
        cfg["k"] = args.k
    if args.no_plots:
        cfg["plots"] = False

    observed = read_matrix(rel(cfg["observed"]))
    signal = read_matrix(rel(cfg["signal"])) if "signal" in cfg else None
    labels = read_labels(rel(cfg["labels"])) if "labels" in cfg else None
    if signal is not None and signal.shape[0] != observed.shape[0]:
        raise IngestionError("signal and observed files have different row counts")
    if labels is not None and labels.shape[0] != observed.shape[0]:
        raise IngestionError("labels and observed files have different row counts")
    subsample = cfg.get("subsample")

    try:
        config = SweepConfig(
            grid=tuple(_grid(cfg["grid"])),
            repeats=cfg.get("repeats", 1),
            k=cfg.get("k", 10),
            signal_dim=None if signal is not None else cfg["signal_dim"],
            subsample=(subsample["m"], subsample["seed"]) if subsample else None,
            settings=TsneSettings.from_dict(cfg.get("tsne", {})),
            base_seed=cfg.get("base_seed", 0),
            aggregate=cfg.get("aggregate", "mean"),
            workers=_resolve_workers(args.workers, cfg),
            q=cfg.get("q", 2),
        )
    except ParameterError as exc:
        raise UsageError(f"{cfg_path}: {exc}") from exc

    result = run_sweep(observed, config, signal_Y=signal)

    out = Path(args.out_dir) if args.out_dir else rel(cfg.get("output_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(format_records(result.records), encoding="utf-8")
    s = result.summary
    _write_json(
        out / "summary.json",
        {
            "schema_version": SCHEMA_VERSION,
            "n": int(observed.shape[0]),
            "grid": list(config.grid),
            "repeats": config.repeats,
            "k": config.k,
            "base_seed": config.base_seed,
            "aggregate": s.aggregate,
            "signal": "provided" if signal is not None else f"pca_{config.signal_dim}",
            "optimal_vs_raw": s.optimal_vs_raw,
            "optimal_vs_signal": s.optimal_vs_signal,
            "valid": s.valid,
            "failures": [
                {"perplexity": f.perplexity, "repeat": f.repeat_index, "seed": f.seed, "error": f.error}
                for f in result.failures
            ],
            "per_perplexity": s.per_perplexity,
        },
    )
    if cfg.get("plots", True):
        _sweep_plots(out, result, config, labels)
    if not s.valid:
        log.error("summary invalid: some grid point has no successful runs")
        return EXIT_RUN
    return EXIT_OK


def _sweep_plots(out: Path, result, config, labels) -> None:
    rows = result.summary.per_perplexity
    xs = [r["perplexity"] for r in rows]
    stat = config.aggregate

    def col(name):
        return [np.nan if r[f"{stat}_{name}"] is None else r[f"{stat}_{name}"] for r in rows]

    (out / "trust_vs_perplexity.svg").write_text(
        plots.line_chart(
            {"vs raw data": (xs, col("trust_raw")), "vs signal": (xs, col("trust_signal"))},
            "Trustworthiness vs perplexity",
            "perplexity",
            f"{stat} trustworthiness",
        )
    )
    (out / "shepard_vs_perplexity.svg").write_text(
        plots.line_chart(
            {"vs raw data": (xs, col("shep_raw")), "vs signal": (xs, col("shep_signal"))},
            "Shepard goodness vs perplexity",
            "perplexity",
            f"{stat} Shepard goodness",
        )
    )
    for frame, attr, opt in (
        ("raw", "trust_vs_raw", result.summary.optimal_vs_raw),
        ("signal", "trust_vs_signal", result.summary.optimal_vs_signal),
    ):
        if opt is None:
            continue
        i = config.grid.index(opt)
        cell = [r for r in result.records if r.perplexity == opt]
        best = max(cell, key=lambda r: getattr(r, attr))
        X = result.embeddings[(i, best.repeat_index)]
        (out / f"embedding_optimal_{frame}.svg").write_text(
            plots.scatter(X, labels, f"Best vs {frame}: perplexity {opt:g}, repeat {best.repeat_index}")
        )


# ---------------------------------------------------------------- eval, scree


def cmd_eval(args) -> int:
    observed = read_matrix(args.observed)
    embedding = read_matrix(args.embedding)
    if embedding.shape[0] != observed.shape[0]:
        raise IngestionError(
            f"{args.embedding}: {embedding.shape[0]} rows, but {args.observed} has {observed.shape[0]}"
        )
    signal = read_matrix(args.signal) if args.signal else None
    if signal is None and args.r is None:
        raise UsageError("eval needs --r or --signal")
    subsample = None
    if args.subsample_m is not None:
        subsample = (args.subsample_m, args.subsample_seed)
    report = evaluate_external(observed, embedding, args.k, args.r, signal, subsample)
    report["schema_version"] = SCHEMA_VERSION
    if args.signal:
        report["signal"] = str(args.signal)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_scree(args) -> int:
    data = read_matrix(args.observed)
    n, p = data.shape
    basis = fit_pca(data, 1)
    count = min(n - 1, p)
    if args.max_components is not None:
        count = min(count, args.max_components)
    values = basis.eigenvalues[:count]
    lines = ["component,eigenvalue"] + [f"{i + 1},{_fmt(v)}" for i, v in enumerate(values)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.svg:
        Path(args.svg).write_text(plots.scree_chart(values))
    return EXIT_OK


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisydr", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a simulated signal-plus-noise data set")
    g.add_argument("generator", choices=["links", "trefoil", "mammoth", "clusters"])
    g.add_argument("--out-dir", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise-sd", type=float, default=1.0)
    g.add_argument("--target-dim", type=int, default=10)
    g.add_argument("--n-per-circle", type=int, default=250)
    g.add_argument("--n-points", type=int, default=500)
    g.add_argument("--path")
    g.add_argument("--n-subsample", type=int, default=500)
    g.add_argument("--clusters", type=int, default=7)
    g.add_argument("--points-per-cluster", type=int, default=50)
    g.add_argument("--dim", type=int, default=7)
    g.add_argument("--mean-scale", type=float, default=10.0)
    g.add_argument("--cov-low", type=float, default=0.5)
    g.add_argument("--cov-high", type=float, default=2.0)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sweep", help="run a perplexity sweep described by a JSON config")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.add_argument("--workers", type=int)
    s.add_argument("--repeats", type=int)
    s.add_argument("--base-seed", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("eval", help="score an externally computed embedding")
    e.add_argument("observed")
    e.add_argument("embedding")
    e.add_argument("--k", type=int, default=10)
    e.add_argument("--r", type=int)
    e.add_argument("--signal")
    e.add_argument("--subsample-m", type=int)
    e.add_argument("--subsample-seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("scree", help="eigenvalue table for choosing the signal dimension")
    c.add_argument("observed")
    c.add_argument("--max-components", type=int)
    c.add_argument("--out")
    c.add_argument("--svg")
    c.set_defaults(func=cmd_scree)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ParameterError) as exc:
        print(f"noisydr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestionError, DataError) as exc:
        print(f"noisydr: ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except RunError as exc:
        print(f"noisydr: run error: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
