"""Optimise two UAVs over the demo city block and print the convergence trace.

    python3 demos/convergence.py
"""

from pathlib import Path

from ckmplace.config import parse_config
from ckmplace.experiment import build_scene, initial_placement, trust_region
from ckmplace import dfo
from ckmplace.network import rates

HERE = Path(__file__).resolve().parent

config = parse_config(HERE / "data" / "two_uav.toml")
scene = build_scene(config)
q0 = initial_placement(config, scene)
placement, result = dfo.run(scene, q0, trust_region(config, scene), seed=config.seed)

print(f"{'iter':>5} {'sum rate':>10} {'radius':>9} {'evals':>6}")
for rec in result.records:
    if rec.accepted or rec.iteration % 25 == 0:
        print(f"{rec.iteration:5d} {rec.objective:10.4f} {rec.delta:9.3f} {rec.evaluations:6d}")

print(f"\nfinal sum rate {result.fx:.4f} bps/Hz after {result.evaluations} evaluations")
for k, ((x, y), r) in enumerate(zip(placement.q, rates(scene, placement)), start=1):
    print(f"  UAV {k}: ({x:7.2f}, {y:7.2f}) m  rate {r:.3f} bps/Hz")
