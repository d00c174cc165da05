"""
============
CLI workflow
============

The ``accelpd`` command runs JSON configurations, parameter sweeps,
acceptance suites and SVG reports. Every step below is equivalent to the
shell command printed next to it.

"""

# %%
# A run configuration
# -------------------

import json
import os
import tempfile
from pathlib import Path

from accelpd.cli import main

work = Path(tempfile.mkdtemp(prefix="accelpd-demo-"))
os.environ["ACCELPD_OUTPUT_DIR"] = str(work / "out")

config = {
    "problem": "quadratic-easy",
    "params": {"alpha": 3, "theta": 0.5, "beta": 1},
    "t_end": 1000,
    "samples": 200,
    "integrator": {"rel_tol": 1e-8, "abs_tol": 1e-10},
}
cfg_path = work / "easy.json"
cfg_path.write_text(json.dumps(config, indent=2))

# %%
# ``accelpd run easy.json`` writes ``easy.csv`` (one row per sample, 17
# significant digits) and ``easy.json`` (rates, flags, convergence report).

print("$ accelpd run", cfg_path)
code = main(["run", str(cfg_path)])
summary = json.loads((work / "out" / "easy.json").read_text())
print("exit", code, "| feas slope", round(summary["rates"]["feas"]["slope"], 3))

# %%
# Sweeps
# ------
#
# ``--grid`` maps dotted field paths to value lists; the Cartesian product
# is run in row-major order, optionally in parallel. ``alpha=3, theta=0.3``
# lies outside the admissible region; it is recorded as a per-run error and
# the remaining points still run.

grid = json.dumps({"params.alpha": [3, 5], "params.theta": [0.5, 0.3]})
print("$ accelpd sweep", cfg_path, "--grid", grid)
main(["sweep", str(cfg_path), "--grid", grid, "--parallel", "2", "--json", str(work / "sweep.json")])

# %%
# Reports
# -------

print("$ accelpd report sweep.json --svg plots/")
main(["report", str(work / "sweep.json"), "--svg", str(work / "plots")])

# %%
# Errors carry exit codes: 2 for configuration problems, 3 when the KKT
# oracle fails, 4 for blow-up or step limits and 5 for acceptance failures.

bad = work / "bad.json"
bad.write_text('{\n  "problem": "quadratic-easy",\n  "params": {"theta": 0.5},\n  "t_end": 10\n}')
print("exit", main(["run", str(bad)]))

# %%
# Acceptance
# ----------
#
# ``accelpd verify basic`` runs the quick criteria; ``all`` takes several
# minutes on one core.

print("$ accelpd verify basic")
main(["verify", "basic", "--json", str(work / "verify.json")])
