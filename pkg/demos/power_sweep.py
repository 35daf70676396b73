"""Sum rate against UAV transmit power; writes demos/out/sweep.csv.

    python3 demos/power_sweep.py
"""

import csv
import dataclasses
from pathlib import Path

import numpy as np

from ckmplace.config import parse_config
from ckmplace.experiment import run_experiment

HERE = Path(__file__).resolve().parent

config = parse_config(HERE / "data" / "two_uav.toml")
config = dataclasses.replace(config, mode="sweep", sweep_dbm=np.arange(0.0, 41.0, 10.0))
written = run_experiment(config, HERE / "out")

with open(written["result"], newline="") as fh:
    rows = list(csv.DictReader(fh))
schemes = list(dict.fromkeys(r["scheme"] for r in rows))
print("P [dBm] " + "".join(f"{s:>10}" for s in schemes))
for p in dict.fromkeys(r["power_dbm"] for r in rows):
    vals = {r["scheme"]: float(r["sum_rate_bps_hz"]) for r in rows if r["power_dbm"] == p}
    print(f"{float(p):7.1f} " + "".join(f"{vals[s]:10.3f}" for s in schemes))
print(f"\nwritten to {written['result']}")
