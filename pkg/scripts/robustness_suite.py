"""Certify the perturbed bound on a larger randomized suite than the default.

    python3 scripts/robustness_suite.py [n_systems] [seed]
"""
import sys
from pathlib import Path

from stabilab.cli import ExperimentConfig, write_result
from stabilab.experiments import resolve_params, run_experiment

n = int(sys.argv[1]) if len(sys.argv) > 1 else 100
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
params = resolve_params("certify", {"n_systems": n})
res = run_experiment("certify", params, seed=seed)
write_result(ExperimentConfig("certify", params, Path(f"results/certify_n{n}_s{seed}"), seed),
             params, res)
print(f"{n} systems, violations {res.summary['violations']}")
sys.exit(0 if res.passed else 1)
