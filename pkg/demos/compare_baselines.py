"""Compare the optimiser with hovering, the LoS design and the lattice optimum.

    python3 demos/compare_baselines.py
"""

import dataclasses
from pathlib import Path

from ckmplace.config import parse_config
from ckmplace.experiment import build_scene, run_scheme
from ckmplace.network import weighted_sum_rate

HERE = Path(__file__).resolve().parent

config = parse_config(HERE / "data" / "two_uav.toml")
config = dataclasses.replace(config, restarts=5, best_start=True, delta0=200.0)
scene = build_scene(config)

print(f"{'scheme':<11} {'sum rate':>9} {'evaluations':>12} {'time':>9}")
for scheme in ("hover", "los", "dfo", "exhaustive"):
    placement, evals, wall_ms, _ = run_scheme(scheme, config, scene)
    value = weighted_sum_rate(scene, placement)
    print(f"{scheme:<11} {value:9.4f} {evals:12d} {wall_ms / 1e3:8.2f}s")
