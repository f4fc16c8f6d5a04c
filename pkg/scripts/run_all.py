"""Run every registered experiment with its defaults and write results/<name>/.

    python3 scripts/run_all.py [--out results] [--seed 0] [--only floquet,certify]
"""
import argparse
import sys
import time
from pathlib import Path

from stabilab.cli import ExperimentConfig, write_result
from stabilab.experiments import EXPERIMENTS, resolve_params, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--svg", action="store_true")
    ap.add_argument("--only", default="", help="comma-separated experiment names")
    args = ap.parse_args(argv)
    names = [n for n in args.only.split(",") if n] or sorted(EXPERIMENTS)
    failed = []
    for name in names:
        params = resolve_params(name, {})
        t0 = time.perf_counter()
        res = run_experiment(name, params, seed=args.seed, tol=args.tol)
        cfg = ExperimentConfig(name, params, args.out / name, args.seed, args.tol, args.svg)
        write_result(cfg, params, res)
        verdict = {True: "pass", False: "FAIL", None: "done"}[res.passed]
        print(f"{name:20s} {verdict:5s} {time.perf_counter() - t0:7.1f}s")
        if res.passed is False:
            failed.append(name)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
