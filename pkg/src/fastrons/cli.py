"""Command-line front end.

``fastrons run CONFIG... [--set key=value]... [--seed S] [--out DIR] [--jobs k]``
runs experiment configs (TOML) and writes ``<stem>_errors.csv``,
``<stem>_trajectory.csv``, ``<stem>_summary.json`` and ``<stem>_manifest.json``.
``fastrons verify SUITE`` runs the built-in oracle suites.

Exit codes: 0 success, 1 experiment failure, 2 usage or validation error.
Errors are also printed to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .experiments import ConfigError, ExperimentAborted, ExperimentConfig, FitError, run_experiment

OUT_ENV = "FASTRONS_OUTPUT_DIR"


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.17g}"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def load_config(path, overrides=(), seed=None) -> ExperimentConfig:
    """Read a TOML config; sections are flattened, unknown keys are rejected."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from None
    flat = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            for k, v in value.items():
                if isinstance(v, dict):
                    raise ConfigError(f"{key}.{k}", "nested tables deeper than one level are not supported")
                if k in flat:
                    raise ConfigError(k, "key given twice")
                flat[k] = v
        else:
            if key in flat:
                raise ConfigError(key, "key given twice")
            flat[key] = value
    flat.setdefault("name", path.stem)
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        flat[k.strip()] = _parse_override(v.strip())
    if seed is not None:
        flat["seed"] = seed
    return ExperimentConfig.from_dict(flat)


def _parse_override(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def write_outputs(report, out_dir: Path, stem: str, started: str) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "errors": out_dir / f"{stem}_errors.csv",
        "trajectory": out_dir / f"{stem}_trajectory.csv",
        "summary": out_dir / f"{stem}_summary.json",
        "manifest": out_dir / f"{stem}_manifest.json",
    }
    cols = report.columns()
    with open(paths["errors"], "w", newline="") as fh:
        fh.write(",".join(["t"] + list(cols)) + "\n")
        for i, t in enumerate(report.times):
            fh.write(",".join([_fmt(t)] + [_fmt(v[i]) for v in cols.values()]) + "\n")
    with open(paths["trajectory"], "w", newline="") as fh:
        n = report.states.shape[1]
        fh.write(",".join(["t"] + [f"q{j}" for j in range(n)]) + "\n")
        for t, q in zip(report.times, report.states):
            fh.write(",".join([_fmt(t)] + [_fmt(v) for v in q]) + "\n")
    summary = {
        "name": stem,
        "completed": report.completed,
        "message": report.message,
        "wall_time": report.wall_time,
        **report.summary,
        "metadata": report.metadata,
    }
    paths["summary"].write_text(_dumps(summary) + "\n")
    manifest = {
        "config": report.config.to_dict(),
        "version": report.metadata.get("version"),
        "build_id": report.metadata.get("build_id"),
        "seed": report.config.seed,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": {k: str(v) for k, v in paths.items()},
    }
    paths["manifest"].write_text(_dumps(manifest) + "\n")
    return manifest


def _error(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return code


def _run_one(args) -> tuple[int, str]:
    path, overrides, seed, out_dir = args
    started = datetime.now(timezone.utc).isoformat()
    try:
        cfg = load_config(path, overrides, seed)
    except ConfigError as exc:
        return _error("validation", str(exc), 2, field=exc.field, config=str(path)), ""
    except UsageError as exc:
        return _error("usage", str(exc), 2, config=str(path)), ""
    stem = Path(path).stem
    try:
        report = run_experiment(cfg)
    except ExperimentAborted as exc:
        write_outputs(exc.report, out_dir, stem, started)
        return _error("aborted", str(exc), 1, config=str(path)), ""
    except FitError as exc:
        return _error("fit", str(exc), 1, config=str(path)), ""
    write_outputs(report, out_dir, stem, started)
    return 0, f"{stem}: " + ", ".join(
        f"{k}={v:.3e}" for k, v in report.summary.items() if isinstance(v, float)
    )


def cmd_run(ns) -> int:
    out_dir = Path(ns.out or os.environ.get(OUT_ENV) or "results")
    jobs = [(p, ns.set or [], ns.seed, out_dir) for p in ns.config]
    if ns.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    for code, line in results:
        if line:
            print(line)
    return max(code for code, _ in results)


def cmd_verify(ns) -> int:
    from .verify import SUITES, run_suite

    if ns.suite not in SUITES and ns.suite != "all":
        return _error("usage", f"unknown suite {ns.suite!r}; choose from {sorted(SUITES) + ['all']}", 2)
    names = sorted(SUITES) if ns.suite == "all" else [ns.suite]
    ok = True
    for name in names:
        for check, passed, detail in run_suite(name):
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'}  {name:<12} {check:<48} {detail}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fastrons", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run experiment configs")
    r.add_argument("config", nargs="+", help="TOML experiment config(s)")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    r.add_argument("--seed", type=int, help="override the seed")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    r.add_argument("--jobs", type=int, default=1, help="run independent configs in parallel")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="run oracle/property suites")
    v.add_argument("suite", help="kernels, theorems, integrators or all")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(ns, "jobs", 1) < 1:
        return _error("usage", "--jobs must be at least 1", 2)
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
