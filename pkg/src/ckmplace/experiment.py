"""Experiment orchestration and CSV output.

Every file written here is a deterministic function of the config file and
its seed; wall-clock times are left blank unless ``run.record_timing`` is set.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from . import baselines, dfo
from .ckm import generate_synthetic_ckm, load_ckm, save_ckm
from .config import ExperimentConfig, parse_scene_file
from .network import NetworkScene, Placement, dbm_to_watt, rates, watt_to_dbm, weighted_sum_rate

log = logging.getLogger(__name__)


def _num(x) -> str:
    return repr(float(x))


def _power_label(powers_w) -> str:
    dbm = np.round(watt_to_dbm(powers_w), 9)
    if np.all(dbm == dbm[0]):
        return _num(dbm[0])
    return ";".join(_num(v) for v in dbm)


def build_scene(config: ExperimentConfig) -> NetworkScene:
    """Network scene with maps loaded from CSV or synthesised from the building file."""
    scene_file = parse_scene_file(config.scene_file) if config.scene_file is not None else None
    maps = []
    for g in config.gbs:
        if g.ckm is not None:
            maps.append(load_ckm(g.ckm))
        else:
            loc = (g.x, g.y, config.gbs_height)
            maps.append(generate_synthetic_ckm(scene_file.scene, loc, config.altitude, config.ckm_spacing))
    return NetworkScene(
        gbs=[(g.x, g.y) for g in config.gbs],
        ckms=maps,
        powers=config.powers_w,
        noise=config.noise_w,
        weights=config.weights,
        area=config.area,
        altitude=config.altitude,
        gbs_height=config.gbs_height,
        interpolation=config.interpolation,
    )


def initial_placement(config: ExperimentConfig, scene: NetworkScene) -> Placement:
    if config.initial == "hover":
        return Placement(scene.area.clip(scene.gbs))
    if config.initial == "center":
        center = 0.5 * (scene.area.lower + scene.area.upper)
        return Placement(np.tile(center, (scene.K, 1)))
    rng = np.random.default_rng([config.seed, 7])
    return Placement(scene.area.sample(rng, scene.K))


def trust_region(config: ExperimentConfig, scene: NetworkScene) -> dfo.TrustRegion:
    return dfo.default_region(
        scene, delta0=config.delta0, beta=config.beta, epsilon=config.epsilon, max_iters=config.max_iters
    )


# -- CSV writers -------------------------------------------------------------------


def _write(path: Path, header, rows) -> Path:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return path


def convergence_header(K: int) -> list:
    cols = ["iter", "objective_bps_hz", "delta_m", "accepted", "eval_count"]
    for k in range(1, K + 1):
        cols += [f"q{k}x_m", f"q{k}y_m"]
    return cols


def write_convergence(path: Path, records, K: int) -> Path:
    rows = [
        [str(r.iteration), _num(r.objective), _num(r.delta), str(int(r.accepted)), str(r.evaluations)]
        + [_num(v) for v in r.x]
        for r in records
    ]
    return _write(path, convergence_header(K), rows)


def result_header(K: int) -> list:
    return (
        ["scheme", "power_dbm", "sum_rate_bps_hz"]
        + [f"rate_k{k}_bps_hz" for k in range(1, K + 1)]
        + ["eval_count", "wall_ms"]
    )


def result_row(scheme, scene, placement, evals, wall_ms, record_timing) -> list:
    r = rates(scene, placement)
    return (
        [scheme, _power_label(scene.powers), _num(scene.weights @ r)]
        + [_num(v) for v in r]
        + [str(int(evals)), f"{wall_ms:.3f}" if record_timing else ""]
    )


def write_placement(path: Path, scene: NetworkScene, placement: Placement) -> Path:
    r = rates(scene, placement)
    rows = [[str(k + 1), _num(x), _num(y), _num(r[k])] for k, (x, y) in enumerate(placement.q)]
    return _write(path, ["uav", "x_m", "y_m", "rate_bps_hz"], rows)


# -- schemes -----------------------------------------------------------------------


def run_scheme(scheme: str, config: ExperimentConfig, scene: NetworkScene, sink=None):
    """Run one placement scheme; returns ``(placement, eval_count, wall_ms, extra)``."""
    t0 = time.perf_counter()
    extra = None
    if scheme == "dfo":
        q0, region = initial_placement(config, scene), trust_region(config, scene)
        if config.restarts == 1:
            placement, res = dfo.run(scene, q0, region, config.seed, sink, config.best_start)
            evals = res.evaluations
        else:
            placement, res, every = dfo.multistart(scene, config.restarts, q0, region, config.seed, config.best_start)
            evals = sum(r.evaluations for r in every)
        extra = res
    elif scheme == "hover":
        placement = baselines.hovering_placement(scene)
        weighted_sum_rate(scene, placement)
        evals = 1
    elif scheme == "los":
        design = baselines.los_design(
            scene,
            trust_region(config, scene),
            seed=config.seed,
            beta0_db=config.los_beta0_db,
            lattice_step=config.grid_step,
            budget=config.budget,
        )
        placement, evals, extra = design.placement, design.evaluations, design
    elif scheme == "exhaustive":
        grid = baselines.SearchGrid.over(scene.area, config.grid_step)
        found = baselines.exhaustive_search(scene, grid, config.budget, config.workers)
        placement, evals, extra = found.placement, found.evaluations, found
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return placement, evals, (time.perf_counter() - t0) * 1e3, extra


def run_experiment(config: ExperimentConfig, out_dir=None) -> dict:
    """Run ``config.mode`` and write its CSV files; returns ``{name: path}``."""
    out = Path(out_dir or config.output_dir or "results")
    out.mkdir(parents=True, exist_ok=True)
    scene = build_scene(config)
    written = {}
    timing = config.record_timing
    mode = config.mode
    log.info("mode=%s K=%d seed=%d out=%s", mode, scene.K, config.seed, out)

    if mode in ("optimize", "exhaustive", "baseline"):
        scheme = {"optimize": "dfo", "exhaustive": "exhaustive", "baseline": config.scheme}[mode]
        placement, evals, wall, extra = run_scheme(scheme, config, scene)
        if scheme == "dfo":
            written["convergence"] = write_convergence(out / "convergence.csv", extra.records, scene.K)
        written["placement"] = write_placement(out / "placement.csv", scene, placement)
        row = result_row(scheme, scene, placement, evals, wall, timing)
        written["result"] = _write(out / "result.csv", result_header(scene.K), [row])
        log.info("%s: sum rate %s bps/Hz after %d evaluations", scheme, row[2], evals)
    elif mode == "sweep":
        rows = []
        for p_dbm in config.sweep_dbm:
            swept = scene.with_powers(np.full(scene.K, dbm_to_watt(p_dbm)))
            for scheme in config.sweep_schemes:
                placement, evals, wall, _ = run_scheme(scheme, config, swept)
                rows.append(result_row(scheme, swept, placement, evals, wall, timing))
                log.info("P=%g dBm %s: %s bps/Hz", p_dbm, scheme, rows[-1][2])
        written["result"] = _write(out / "sweep.csv", result_header(scene.K), rows)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return written


def generate_ckms(scene_path, gbs="all", spacing: float = 5.0, out_dir=".", altitude=None) -> list:
    """Write ``ckm_gbs<k>.csv`` for the GBSs of a scene file (``gbs`` is 1-based or "all")."""
    sf = parse_scene_file(scene_path)
    if sf.gbs.shape[0] == 0:
        raise ValueError(f"{scene_path} lists no [[gbs]] entries")
    altitude = altitude if altitude is not None else (sf.altitude or 50.0)
    if gbs == "all":
        indices = range(sf.gbs.shape[0])
    else:
        k = int(gbs)
        if not 1 <= k <= sf.gbs.shape[0]:
            raise ValueError(f"GBS index {k} out of range 1..{sf.gbs.shape[0]}")
        indices = [k - 1]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in indices:
        ckm = generate_synthetic_ckm(sf.scene, sf.gbs_location(k), altitude, spacing)
        path = out / f"ckm_gbs{k + 1}.csv"
        save_ckm(ckm, path)
        paths.append(path)
    return paths
