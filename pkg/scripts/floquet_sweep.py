"""Closed-form versus integrated monodromy of the periodic pulse over a T-grid.

Writes results/floquet_T/sweep.csv and a plot of |lambda| against T.
"""
import sys
from pathlib import Path

import numpy as np

from stabilab.experiments import Table
from stabilab.floquet import SWEEP_COLUMNS, FloquetParams, sweep, sweep_svg

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results/floquet_T")
out.mkdir(parents=True, exist_ok=True)
grid = [FloquetParams(1.0, 2.0, float(T), 1.0) for T in np.linspace(1.5, 30.0, 58)]
rows = sweep(grid)
(out / "sweep.csv").write_text(Table(SWEEP_COLUMNS, [tuple(r) for r in rows]).to_csv())
(out / "multipliers.svg").write_text(sweep_svg(rows))
print(f"{len(rows)} periods, max rel err {max(r.rel_err for r in rows):.2e}")
