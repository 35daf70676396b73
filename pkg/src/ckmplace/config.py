"""TOML experiment and scene configuration.

Experiment files carry four sections::

    [scene]                       # area, altitude, GBS list, maps
    [uav]                         # powers and rate weights
    [optimizer]                   # trust-region parameters, seed, start mode
    [run]                         # mode and mode-specific settings

Powers and noise are written in dBm (numbers, or strings such as
``"30 dBm"`` / ``"1 W"``) and converted to watts here. Unknown keys are
errors, reported with the line they appear on.
"""

from __future__ import annotations

import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .ckm import BuildingScene, SceneFile
from .errors import ConfigError
from .geometry import Area, Building

SEED_ENV = "CKMPLACE_SEED"
MODES = ("optimize", "exhaustive", "baseline", "sweep")
SCHEMES = ("dfo", "hover", "los", "exhaustive")
INIT_MODES = ("hover", "center", "random")


class _Locator:
    """Maps ``section.key`` paths back to line numbers in the source text."""

    _table = re.compile(r"^\s*\[\[?\s*([A-Za-z0-9_.\-]+)\s*\]\]?")
    _key = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")

    def __init__(self, text: str):
        self.lines = {}
        section = ""
        for lineno, line in enumerate(text.splitlines(), start=1):
            m = self._table.match(line)
            if m:
                section = m.group(1)
                self.lines.setdefault(section, lineno)
                continue
            m = self._key.match(line)
            if m:
                self.lines.setdefault(f"{section}.{m.group(1)}" if section else m.group(1), lineno)

    def line(self, dotted: str):
        return self.lines.get(dotted)


class _Reader:
    def __init__(self, path):
        self.path = Path(path)
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read file: {exc}", self.path) from None
        try:
            self.data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            line = re.search(r"line (\d+)", str(exc))
            raise ConfigError(f"syntax error: {exc}", self.path, int(line.group(1)) if line else None) from None
        self.where = _Locator(text)

    def error(self, message, key=None):
        line = None
        if key is not None:
            parts = key.split(".")
            while parts and line is None:
                line = self.where.line(".".join(parts))
                parts.pop()
        return ConfigError(message if key is None else f"{key}: {message}", self.path, line)

    def table(self, data, name, allowed, required=()):
        if not isinstance(data, dict):
            raise self.error("expected a table", name)
        for key in data:
            if key not in allowed:
                raise self.error(f"unknown key (allowed: {', '.join(sorted(allowed))})", f"{name}.{key}" if name else key)
        for key in required:
            if key not in data:
                raise self.error(f"missing required key {key!r}", name or None)
        return data

    def number(self, data, name, key, default=None, check=None, what=""):
        dotted = f"{name}.{key}" if name else key
        if key not in data:
            if default is None:
                raise self.error("missing required value", name or None)
            return default
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(f"expected a number, got {value!r}", dotted)
        value = float(value)
        if not np.isfinite(value) or (check is not None and not check(value)):
            raise self.error(f"invalid value {value!r}{': ' + what if what else ''}", dotted)
        return value

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else (self.path.parent / p)


_POWER = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(dBm|dBW|W|mW)?\s*$")


def parse_power(value) -> float:
    """Power in watts from a dBm number or a string with a unit."""
    if isinstance(value, bool):
        raise ValueError(f"not a power: {value!r}")
    if isinstance(value, (int, float)):
        return float(10.0 ** ((float(value) - 30.0) / 10.0))
    m = _POWER.match(str(value))
    if not m:
        raise ValueError(f"not a power: {value!r}")
    x, unit = float(m.group(1)), m.group(2) or "dBm"
    watts = {
        "dBm": lambda v: 10.0 ** ((v - 30.0) / 10.0),
        "dBW": lambda v: 10.0 ** (v / 10.0),
        "W": lambda v: v,
        "mW": lambda v: v * 1e-3,
    }[unit](x)
    if not watts > 0:
        raise ValueError(f"power must be positive: {value!r}")
    return float(watts)


def parse_range(text: str) -> np.ndarray:
    """``"start:step:stop"`` (inclusive stop) to an array."""
    try:
        start, step, stop = (float(v) for v in str(text).split(":"))
    except ValueError:
        raise ValueError(f"expected start:step:stop, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ValueError(f"empty or descending range {text!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _area(reader: _Reader, data, key) -> Area:
    value = data.get(key.rpartition(".")[2])
    if not (isinstance(value, list) and len(value) == 4 and all(isinstance(v, (int, float)) for v in value)):
        raise reader.error("expected [xmin, xmax, ymin, ymax]", key)
    try:
        area = Area(*(float(v) for v in value))
    except ValueError as exc:
        raise reader.error(str(exc), key) from None
    if area.width <= 0 or area.height <= 0:
        raise reader.error("area must have positive width and height", key)
    return area


# -- scene files -----------------------------------------------------------------

_SCENE_KEYS = {"area", "beta0_db", "blockage_db", "penetration_db_per_m", "gbs_height_m", "altitude_m", "building", "gbs"}
_BUILDING_KEYS = {"xmin", "xmax", "ymin", "ymax", "height_m"}


def parse_scene_file(path) -> SceneFile:
    """Read a building-scene TOML file (area, constants, buildings, optional GBSs)."""
    r = _Reader(path)
    d = r.table(r.data, "", _SCENE_KEYS, required=("area",))
    area = _area(r, d, "area")
    blocks = []
    for i, b in enumerate(d.get("building", [])):
        r.table(b, "building", _BUILDING_KEYS, required=tuple(_BUILDING_KEYS))
        try:
            blocks.append(Building(*(r.number(b, "building", k) for k in ("xmin", "xmax", "ymin", "ymax", "height_m"))))
        except ValueError as exc:
            raise r.error(f"building #{i + 1}: {exc}", "building") from None
    gbs = []
    for g in d.get("gbs", []):
        r.table(g, "gbs", {"x_m", "y_m"}, required=("x_m", "y_m"))
        gbs.append((r.number(g, "gbs", "x_m"), r.number(g, "gbs", "y_m")))
    try:
        scene = BuildingScene(
            area,
            tuple(blocks),
            beta0_db=r.number(d, "", "beta0_db", -30.0),
            blockage_db=r.number(d, "", "blockage_db", 20.0, lambda v: v >= 0, "must be >= 0"),
            penetration_db_per_m=r.number(d, "", "penetration_db_per_m", 0.5, lambda v: v >= 0, "must be >= 0"),
        )
    except ValueError as exc:
        raise r.error(str(exc)) from None
    altitude = d.get("altitude_m")
    return SceneFile(
        scene,
        np.array(gbs, dtype=float).reshape(-1, 2),
        r.number(d, "", "gbs_height_m", 2.0, lambda v: v >= 0, "must be >= 0"),
        None if altitude is None else r.number(d, "", "altitude_m", check=lambda v: v > 0),
    )


# -- experiment files ---------------------------------------------------------------


@dataclass
class GbsConfig:
    x: float
    y: float
    ckm: Path | None = None


@dataclass
class ExperimentConfig:
    path: Path
    area: Area
    altitude: float
    gbs_height: float
    gbs: list
    noise_w: np.ndarray
    powers_w: np.ndarray
    weights: np.ndarray
    scene_file: Path | None = None
    ckm_spacing: float = 5.0
    interpolation: str = "nearest"
    delta0: float | None = None
    beta: float = 0.5
    epsilon: float = 1.0
    max_iters: int = 500
    seed: int = 0
    initial: str = "hover"
    best_start: bool = False
    restarts: int = 1
    mode: str = "optimize"
    grid_step: float = 5.0
    scheme: str = "hover"
    sweep_dbm: np.ndarray = field(default_factory=lambda: np.arange(0.0, 31.0, 5.0))
    sweep_schemes: tuple = ("dfo", "hover", "los")
    output_dir: Path | None = None
    los_beta0_db: float = -30.0
    budget: int = 200_000_000
    workers: int = 1
    record_timing: bool = False

    @property
    def K(self) -> int:
        return len(self.gbs)


_SECTIONS = {"scene", "uav", "optimizer", "run"}
_SCENE = {"area", "altitude_m", "gbs_height_m", "noise_dbm", "buildings", "ckm_spacing_m", "interpolation", "gbs"}
_GBS = {"x_m", "y_m", "ckm", "noise_dbm"}
_UAV = {"count", "power_dbm", "power", "weights"}
_OPT = {"delta0_m", "beta", "epsilon_m", "max_iters", "seed", "initial", "best_start", "restarts"}
_RUN = {"mode", "grid_step_m", "scheme", "sweep_dbm", "sweep_schemes", "output_dir", "los_beta0_db", "budget", "workers", "record_timing"}


def _per_uav(r: _Reader, value, K, key, convert):
    values = value if isinstance(value, list) else [value] * K
    if len(values) != K:
        raise r.error(f"expected {K} values, got {len(values)}", key)
    try:
        return np.array([convert(v) for v in values], dtype=float)
    except (TypeError, ValueError) as exc:
        raise r.error(str(exc), key) from None


def parse_config(path) -> ExperimentConfig:
    """Load and validate an experiment file."""
    r = _Reader(path)
    top = r.table(r.data, "", _SECTIONS, required=("scene", "uav"))

    s = r.table(top["scene"], "scene", _SCENE, required=("area", "gbs"))
    area = _area(r, s, "scene.area")
    gbs_list = s["gbs"]
    if not isinstance(gbs_list, list) or not gbs_list:
        raise r.error("at least one [[scene.gbs]] entry is required", "scene.gbs")
    gbs, noise = [], []
    default_noise = s.get("noise_dbm", -100.0)
    for g in gbs_list:
        r.table(g, "scene.gbs", _GBS, required=("x_m", "y_m"))
        ckm = g.get("ckm")
        if ckm is not None and not r.resolve(ckm).is_file():
            raise r.error(f"map file {ckm!r} not found", "scene.gbs.ckm")
        gbs.append(GbsConfig(r.number(g, "scene.gbs", "x_m"), r.number(g, "scene.gbs", "y_m"), r.resolve(ckm) if ckm else None))
        noise.append(g.get("noise_dbm", default_noise))
    K = len(gbs)
    noise_w = _per_uav(r, noise, K, "scene.noise_dbm", parse_power)
    scene_file = r.resolve(s["buildings"]) if "buildings" in s else None
    if scene_file is not None and not scene_file.is_file():
        raise r.error(f"scene file {s['buildings']!r} not found", "scene.buildings")
    if scene_file is None and any(g.ckm is None for g in gbs):
        raise r.error("every GBS needs a ckm path unless scene.buildings is given", "scene.gbs")
    interpolation = s.get("interpolation", "nearest")
    if interpolation not in ("nearest", "bilinear"):
        raise r.error(f"unknown interpolation {interpolation!r}", "scene.interpolation")

    u = r.table(top["uav"], "uav", _UAV)
    count = u.get("count", K)
    if count != K:
        raise r.error(f"uav.count = {count} but {K} GBSs are listed", "uav.count")
    if "power_dbm" in u and "power" in u:
        raise r.error("give either power_dbm or power, not both", "uav.power")
    power = u.get("power_dbm", u.get("power", 30.0))
    powers_w = _per_uav(r, power, K, "uav.power_dbm" if "power_dbm" in u else "uav.power", parse_power)
    weights = _per_uav(r, u.get("weights", 1.0), K, "uav.weights", float)
    if not np.all(weights > 0):
        raise r.error("rate weights must be > 0", "uav.weights")

    o = r.table(top.get("optimizer", {}), "optimizer", _OPT)
    delta0 = r.number(o, "optimizer", "delta0_m", 0.0, lambda v: v >= 0, "must be > 0") or None
    if "delta0_m" in o and delta0 is None:
        raise r.error("must be > 0", "optimizer.delta0_m")
    beta = r.number(o, "optimizer", "beta", 0.5, lambda v: 0 < v < 1, "must lie in (0, 1)")
    epsilon = r.number(o, "optimizer", "epsilon_m", 1.0, lambda v: v > 0, "must be > 0")
    max_iters = r.number(o, "optimizer", "max_iters", 500, lambda v: v >= 1 and v == int(v), "positive integer")
    seed = r.number(o, "optimizer", "seed", 0, lambda v: v >= 0 and v == int(v), "non-negative integer")
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None and env_seed.strip():
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env_seed!r} is not an integer") from None
    initial = o.get("initial", "hover")
    if initial not in INIT_MODES:
        raise r.error(f"must be one of {', '.join(INIT_MODES)}", "optimizer.initial")

    best_start = o.get("best_start", False)
    if not isinstance(best_start, bool):
        raise r.error("expected true or false", "optimizer.best_start")

    rn = r.table(top.get("run", {}), "run", _RUN)
    mode = rn.get("mode", "optimize")
    if mode not in MODES:
        raise r.error(f"must be one of {', '.join(MODES)}", "run.mode")
    scheme = rn.get("scheme", "hover")
    if scheme not in ("hover", "los"):
        raise r.error("must be hover or los", "run.scheme")
    try:
        sweep = parse_range(rn.get("sweep_dbm", "0:5:30"))
    except ValueError as exc:
        raise r.error(str(exc), "run.sweep_dbm") from None
    sweep_schemes = tuple(rn.get("sweep_schemes", ("dfo", "hover", "los")))
    bad = [x for x in sweep_schemes if x not in SCHEMES]
    if bad or not sweep_schemes:
        raise r.error(f"unknown schemes {bad}; allowed {', '.join(SCHEMES)}", "run.sweep_schemes")
    record_timing = rn.get("record_timing", False)
    if not isinstance(record_timing, bool):
        raise r.error("expected true or false", "run.record_timing")

    return ExperimentConfig(
        path=r.path,
        area=area,
        altitude=r.number(s, "scene", "altitude_m", 50.0, lambda v: v > 0, "must be > 0"),
        gbs_height=r.number(s, "scene", "gbs_height_m", 2.0, lambda v: v >= 0, "must be >= 0"),
        gbs=gbs,
        noise_w=noise_w,
        powers_w=powers_w,
        weights=weights,
        scene_file=scene_file,
        ckm_spacing=r.number(s, "scene", "ckm_spacing_m", 5.0, lambda v: v > 0, "must be > 0"),
        interpolation=interpolation,
        delta0=delta0,
        beta=beta,
        epsilon=epsilon,
        max_iters=int(max_iters),
        seed=int(seed),
        initial=initial,
        best_start=best_start,
        restarts=int(r.number(o, "optimizer", "restarts", 1, lambda v: v >= 1 and v == int(v), "positive integer")),
        mode=mode,
        grid_step=r.number(rn, "run", "grid_step_m", 5.0, lambda v: v > 0, "must be > 0"),
        scheme=scheme,
        sweep_dbm=sweep,
        sweep_schemes=sweep_schemes,
        output_dir=r.resolve(rn["output_dir"]) if "output_dir" in rn else None,
        los_beta0_db=r.number(rn, "run", "los_beta0_db", -30.0),
        budget=int(r.number(rn, "run", "budget", 200_000_000, lambda v: v >= 1, "must be >= 1")),
        workers=int(r.number(rn, "run", "workers", 1, lambda v: v >= 1 and v == int(v), "positive integer")),
        record_timing=record_timing,
    )
