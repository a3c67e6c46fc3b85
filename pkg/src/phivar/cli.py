"""Command line interface.

    phivar run <experiment> [--key value ...] [--config FILE] [--seed N] [--output-dir DIR]
    phivar list-experiments
    phivar validate-config FILE
    phivar parse-token TOKEN

Exit status: 0 when every configured check passes, 1 when a check fails,
2 for invalid input.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ConfigError", "ExperimentConfig", "SCHEMAS", "parse_config", "parse_config_text",
           "format_config", "token_parse", "main"]


class ConfigError(ValueError):
    def __init__(self, message, line=None, column=None):
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)
        self.line, self.column = line, column


def _int(s):
    return int(s, 0) if isinstance(s, str) else int(s)


def _int_list(s):
    if isinstance(s, (list, tuple)):
        return tuple(int(x) for x in s)
    return tuple(int(x) for x in str(s).split(",") if x.strip())


def _opt_float(s):
    return None if s in (None, "", "none") else float(s)


# parameter -> (converter, default)
SCHEMAS = {
    "sigma-constant": {"m": (_int, 1), "H": (float, 0.75), "cells": (_int, 128)},
    "series-check": {"case": (_int, 1), "p": (float, 2.0), "alpha": (float, 2.0), "beta0": (float, 1.0),
                     "beta": (float, 1.4), "c": (float, 1.0), "r": (float, 1.0), "v": (_opt_float, None),
                     "C_scale": (float, 1.0), "m_max": (_int, 200), "constant": (str, "corrected"),
                     "expect": (str, "converges")},
    "limiting-variation": {"m": (_int, 1), "H": (float, 0.5), "grid": (_int, 2**16), "grids": (_int_list, ()),
                           "paths": (_int, 20), "delta_factor": (float, 4.0), "lo": (float, 1.0),
                           "hi": (float, 3.5)},
    "chaining": {"H": (float, 0.5), "alpha": (float, 2.0), "grids": (_int_list, (2**12, 2**16)),
                 "paths": (_int, 20), "max_growth": (float, 0.10)},
    "covariance": {"m": (_int, 1), "H": (float, 0.7), "n": (_int, 1024), "paths": (_int, 20000),
                   "points": (_int, 8), "k_sigma": (_opt_float, None)},
    "jm-bound": {"H": (float, 0.5), "p": (float, 3.0), "grids": (_int_list, (2**10, 2**12, 2**14)),
                 "paths": (_int, 20), "tolerance": (float, 0.20)},
}
TOP_KEYS = ("experiment", "seed", "output_dir")


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "phivar-out"

    def __post_init__(self):
        if self.experiment not in SCHEMAS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(SCHEMAS)}")
        schema = SCHEMAS[self.experiment]
        typed = {}
        for k, v in self.params.items():
            if k not in schema:
                raise ConfigError(f"unknown parameter {k!r} for {self.experiment}")
            try:
                typed[k] = schema[k][0](v)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"bad value {v!r} for {k}: {e}") from None
        self.params = typed
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        self.seed = int(self.seed)

    def resolved(self):
        schema = SCHEMAS[self.experiment]
        return {k: self.params.get(k, d) for k, (_, d) in schema.items()}

    def digest(self):
        return hashlib.sha256(format_config(self).encode()).hexdigest()


def _fmt_value(v):
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if v is None:
        return "none"
    return repr(v) if isinstance(v, float) else str(v)


def format_config(cfg: ExperimentConfig) -> str:
    lines = [f"experiment={cfg.experiment}", f"seed={cfg.seed}", f"output_dir={cfg.output_dir}"]
    lines += [f"{k}={_fmt_value(v)}" for k, v in sorted(cfg.params.items())]
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> ExperimentConfig:
    """Flat ``key=value`` lines; ``#`` starts a comment.  Errors cite line and column."""
    top, params, seen = {}, {}, {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            col = len(raw) - len(raw.lstrip()) + 1
            raise ConfigError("expected key=value", ln, col)
        key_part, val = line.split("=", 1)
        key = key_part.strip()
        col = len(key_part) - len(key_part.lstrip()) + 1
        if not key or not key.replace("_", "").isalnum():
            raise ConfigError(f"invalid key {key!r}", ln, col)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", ln, col)
        seen[key] = ln
        (top if key in TOP_KEYS else params)[key] = (val.strip(), ln, col)
    if "experiment" not in top:
        raise ConfigError("missing key 'experiment'")
    exp = top["experiment"][0]
    if exp not in SCHEMAS:
        _, ln, col = top["experiment"]
        raise ConfigError(f"unknown experiment {exp!r}", ln, col + len("experiment="))
    schema = SCHEMAS[exp]
    typed = {}
    for k, (v, ln, col) in params.items():
        if k not in schema:
            raise ConfigError(f"unknown parameter {k!r} for {exp}", ln, col)
        try:
            typed[k] = schema[k][0](v)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value {v!r} for {k}", ln, col + len(k) + 1) from None
    seed = 0
    if "seed" in top:
        v, ln, col = top["seed"]
        try:
            seed = _int(v)
        except ValueError:
            raise ConfigError(f"bad seed {v!r}", ln, col + len("seed=")) from None
    out_dir = top["output_dir"][0] if "output_dir" in top else "phivar-out"
    return ExperimentConfig(exp, typed, seed, out_dir)


def parse_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())


def token_parse(token: str):
    from .funcs import parse_token

    return parse_token(token)


# -- running --------------------------------------------------------------------

def _call(cfg: ExperimentConfig):
    from . import experiments as ex

    p = cfg.resolved()
    seed = cfg.seed
    if cfg.experiment == "sigma-constant":
        return ex.sigma_constant(p["m"], p["H"], p["cells"], seed)
    if cfg.experiment == "series-check":
        return ex.series_check(**p)
    if cfg.experiment == "limiting-variation":
        grids = p["grids"] or (p["grid"],)
        return ex.limiting_variation(p["m"], p["H"], grids, p["paths"], p["delta_factor"], seed, p["lo"], p["hi"])
    if cfg.experiment == "chaining":
        return ex.chaining(p["H"], p["alpha"], p["grids"], p["paths"], seed, p["max_growth"])
    if cfg.experiment == "covariance":
        return ex.covariance(p["m"], p["H"], p["n"], p["paths"], seed, p["points"], p["k_sigma"])
    return ex.jm_bound(p["H"], p["p"], p["grids"], p["paths"], seed, p["tolerance"])


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return repr(v.item()) if isinstance(v.item(), float) else str(v.item())
    return str(v)


def _write_outputs(cfg, outcome, wall):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in outcome.tables.items():
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        # whitespace-separated copy for plotting tools
        with open(out / f"{name}.dat", "w") as fh:
            fh.write("# " + " ".join(header) + "\n")
            for row in rows:
                fh.write(" ".join(_cell(v) for v in row) + "\n")
    (out / "config.txt").write_text(format_config(cfg))
    import numpy, scipy

    from . import __version__

    manifest = {
        "experiment": cfg.experiment,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "versions": {"phivar": __version__, "python": platform.python_version(),
                     "numpy": numpy.__version__, "scipy": scipy.__version__},
        "wall_time_s": round(wall, 3),
        "passed": outcome.passed,
        "checks": [{"check": d, "passed": ok} for d, ok in outcome.checks],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def run(cfg: ExperimentConfig, threads: int | None = None, stream=None) -> int:
    from threadpoolctl import threadpool_limits

    stream = stream or sys.stdout
    t0 = time.perf_counter()
    with threadpool_limits(limits=threads):
        outcome = _call(cfg)
    wall = time.perf_counter() - t0
    _write_outputs(cfg, outcome, wall)
    print(f"experiment: {cfg.experiment}  (seed {cfg.seed}, {wall:.1f} s)", file=stream)
    for k, v in outcome.summary.items():
        print(f"  {k} = {_cell(v)}", file=stream)
    for name, (header, rows) in outcome.tables.items():
        if len(rows) <= 12:
            print(f"  [{name}] " + "  ".join(header), file=stream)
            for row in rows:
                print("    " + "  ".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row), file=stream)
    for d, ok in outcome.checks:
        print(f"  {'PASS' if ok else 'FAIL'}  {d}", file=stream)
    print("PASS" if outcome.passed else "FAIL", file=stream)
    return 0 if outcome.passed else 1


def _build_parser():
    ap = argparse.ArgumentParser(prog="phivar", description="Φ-variation experiments for Hermite processes")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("experiment", nargs="?", help="experiment name (or give --config)")
    r.add_argument("--config", help="flat key=value config file")
    r.add_argument("--seed", type=_int, default=None)
    r.add_argument("--output-dir", default=None)
    r.add_argument("--threads", type=int, default=int(os.environ.get("PHIVAR_THREADS", 0)) or None,
                   help="cap on numeric worker threads (default: all cores)")
    sub.add_parser("list-experiments", help="list experiments and their parameters")
    v = sub.add_parser("validate-config", help="check a config file without running it")
    v.add_argument("file")
    t = sub.add_parser("parse-token", help="parse a variation-function token such as power:p=2")
    t.add_argument("token")
    return ap


def _split_params(extra):
    params, i = {}, 0
    while i < len(extra):
        a = extra[i]
        if not a.startswith("--"):
            raise ConfigError(f"unexpected argument {a!r}")
        key = a[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {a}")
            val = extra[i + 1]
            i += 2
        params[key.replace("-", "_")] = val
    return params


def main(argv=None) -> int:
    ap = _build_parser()
    args, extra = ap.parse_known_args(argv)
    try:
        if args.command == "list-experiments":
            if extra:
                raise ConfigError(f"unexpected arguments {extra}")
            for name, schema in SCHEMAS.items():
                keys = ", ".join(f"{k}={_fmt_value(d)}" for k, (_, d) in schema.items())
                print(f"{name}: {keys}")
            return 0
        if args.command == "validate-config":
            cfg = parse_config(args.file)
            print(f"ok: {cfg.experiment} (sha256 {cfg.digest()[:12]})")
            return 0
        if args.command == "parse-token":
            from .funcs import TokenError

            try:
                phi = token_parse(args.token)
            except TokenError as e:
                raise ConfigError(str(e)) from None
            print(repr(phi))
            return 0
        params = _split_params(extra)
        if args.config:
            base = parse_config(args.config)
            if args.experiment and args.experiment != base.experiment:
                raise ConfigError(f"config is for {base.experiment!r}, not {args.experiment!r}")
            merged = {**base.params, **params}
            cfg = ExperimentConfig(base.experiment, merged,
                                   base.seed if args.seed is None else args.seed,
                                   args.output_dir or base.output_dir)
        else:
            if not args.experiment:
                raise ConfigError("give an experiment name or --config")
            cfg = ExperimentConfig(args.experiment, params, args.seed or 0,
                                   args.output_dir or f"phivar-out/{args.experiment}")
        return run(cfg, args.threads)
    except (ConfigError, OSError) as e:
        print(f"phivar: error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"phivar: invalid parameters: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
