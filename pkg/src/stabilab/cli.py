"""Command-line runner for the named experiments.

    python3 -m stabilab run beta alpha=-1 M=1 K=2 delta=0.01 h=10
    python3 -m stabilab floquet sweep --out results/floquet --svg
    python3 -m stabilab kakutani schedule N=512 steps=3

Parameters are flat ``key=value`` tokens, ``--key value`` flags, or lines of
a ``--config`` file.  Every run writes ``manifest.json`` plus one CSV per
result table into ``--out``.  Exit status: 0 pass, 1 certification failure,
2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .errors import DomainError, InputError, NumericError, ParameterError
from .experiments import EXPERIMENTS, ExperimentResult, resolve_params, run_experiment

__all__ = ["ExperimentConfig", "main", "parse_config_text", "write_result", "EXIT"]

EXIT = {"pass": 0, "fail": 1, "usage": 2, "numeric": 3}

# module-style commands mapped onto experiment names
ALIASES = {
    ("bounds", "beta"): "beta",
    ("bounds", "region"): "region",
    ("bounds", "omega0"): "omega0",
    ("bounds", "l2check"): "l2check",
    ("bounds", "triple"): "triple",
    ("signals", "mean"): "gap-mean",
    ("shifts", "dump"): "shifts-dump",
    ("floquet", "sweep"): "floquet",
    ("kakutani", "static"): "kakutani-static",
    ("kakutani", "schedule"): "kakutani-schedule",
    ("kakutani", "verify"): "kakutani-schedule",
    ("certify", None): "certify",
    ("sweep", None): "oscillation-sweep",
}


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    output_dir: Path = Path("results")
    seed: int = 0
    tol: float = 1e-8
    svg: bool = False

    def validate(self) -> dict:
        return resolve_params(self.experiment, self.parameters)


def parse_config_text(text: str) -> dict:
    """Flat ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {n}: expected key=value, got {line!r}")
        k, v = (x.strip() for x in line.split("=", 1))
        if not k:
            raise InputError(f"config line {n}: empty key")
        if k in out:
            raise InputError(f"config line {n}: duplicate key {k!r}")
        out[k] = v
    return out


def _parse_params(tokens: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.startswith("--"):
            body = tok[2:]
            if "=" in body:
                k, v = body.split("=", 1)
            else:
                if i + 1 >= len(tokens):
                    raise InputError(f"flag {tok} needs a value")
                k, v = body, tokens[i + 1]
                i += 1
            k = k.replace("-", "_")
        elif "=" in tok:
            k, v = tok.split("=", 1)
        else:
            raise InputError(f"unexpected argument {tok!r}; parameters are key=value")
        if k in out:
            raise InputError(f"parameter {k!r} given twice")
        out[k] = v
        i += 1
    return out


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stabilab",
        description="Stability of nonautonomous linear systems under small perturbations.",
    )
    ap.add_argument("--out", type=Path, default=None, help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float, default=1e-8, help="integration tolerance")
    ap.add_argument("--svg", action="store_true", help="also write SVG plots")
    ap.add_argument("--config", type=Path, default=None, help="flat key=value file")
    ap.add_argument("command", help="run | list | bounds | signals | shifts | floquet | "
                    "kakutani | certify | sweep")
    ap.add_argument("rest", nargs=argparse.REMAINDER)
    return ap


def _split_global_flags(argv: list[str]) -> tuple[list[str], list[str]]:
    """Pull the common flags out from anywhere on the line."""
    glob, rest = [], []
    i = 0
    with_value = {"--out", "--seed", "--tol", "--config"}
    while i < len(argv):
        a = argv[i]
        name = a.split("=", 1)[0]
        if name in with_value:
            glob.append(a)
            if "=" not in a:
                if i + 1 >= len(argv):
                    raise InputError(f"flag {a} needs a value")
                glob.append(argv[i + 1])
                i += 1
        elif a == "--svg":
            glob.append(a)
        else:
            rest.append(a)
        i += 1
    return glob, rest


def config_from_argv(argv: list[str]) -> ExperimentConfig | None:
    """Translate a command line into a config (``None`` for ``list``)."""
    glob, rest = _split_global_flags(argv)
    if not rest:
        raise InputError("no command given; try 'run <experiment> key=value ...' or 'list'")
    ns = _build_parser().parse_args(glob + rest[:1])
    cmd, tail = rest[0], rest[1:]
    file_params = parse_config_text(ns.config.read_text()) if ns.config else {}
    if cmd == "list":
        return None
    if cmd == "run":
        if tail and not tail[0].startswith("-") and "=" not in tail[0]:
            name, tail = tail[0], tail[1:]
        elif "experiment" in file_params:
            name = file_params["experiment"]
        else:
            raise InputError("run needs an experiment name")
    elif tail and (cmd, tail[0]) in ALIASES:
        name, tail = ALIASES[(cmd, tail[0])], tail[1:]
    elif (cmd, None) in ALIASES:
        name = ALIASES[(cmd, None)]
    else:
        raise InputError(f"unknown command {' '.join([cmd, *tail[:1]])!r}")
    file_params.pop("experiment", None)
    params = {**file_params, **_parse_params(tail)}
    out = ns.out if ns.out is not None else Path("results") / name
    return ExperimentConfig(name, params, out, ns.seed, ns.tol, ns.svg)


def _versions() -> dict:
    from . import __version__
    return {"stabilab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_result(cfg: ExperimentConfig, params: dict, result: ExperimentResult) -> list[Path]:
    """Write the manifest and CSVs (and SVGs if requested); returns the paths."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in result.tables.items():
        path = out / f"{name}.csv"
        path.write_text(table.to_csv())
        written.append(path)
    if cfg.svg:
        for name, svg in result.svgs.items():
            path = out / f"{name}.svg"
            path.write_text(svg)
            written.append(path)
    from .experiments import format_value
    manifest = {
        "experiment": cfg.experiment,
        "reproduces": result.reproduces,
        "parameters": {k: format_value(v) if not isinstance(v, list) else v
                       for k, v in params.items()},
        "seed": cfg.seed,
        "tol": cfg.tol,
        "versions": _versions(),
        "tables": sorted(f"{n}.csv" for n in result.tables),
        "passed": result.passed,
        "summary": {k: format_value(v) for k, v in result.summary.items()},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = config_from_argv(argv)
        if cfg is None:
            for name in sorted(EXPERIMENTS):
                print(f"{name}: {EXPERIMENTS[name].reproduces}")
            return EXIT["pass"]
        params = cfg.validate()
    except (InputError, ParameterError, DomainError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT["usage"]
    except SystemExit as exc:  # argparse
        return EXIT["usage"] if exc.code else EXIT["pass"]
    try:
        result = run_experiment(cfg.experiment, params, seed=cfg.seed, tol=cfg.tol)
    except NumericError as exc:
        print(f"numerical failure in {cfg.experiment}: {exc}", file=sys.stderr)
        return EXIT["numeric"]
    except (InputError, ParameterError, DomainError) as exc:
        print(f"usage error in {cfg.experiment}: {exc}", file=sys.stderr)
        return EXIT["usage"]
    paths = write_result(cfg, params, result)
    for k, v in result.summary.items():
        print(f"{k} = {v}")
    verdict = {True: "PASS", False: "FAIL", None: "DONE"}[result.passed]
    print(f"{cfg.experiment}: {verdict} ({len(paths)} files in {cfg.output_dir})")
    return EXIT["fail"] if result.passed is False else EXIT["pass"]
