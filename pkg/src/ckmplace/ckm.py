"""Discrete channel knowledge maps (CKMs) and a synthetic map generator.

A CKM stores the large-scale channel gain (dB) between one ground base
station and a UAV at a fixed altitude, sampled on a uniform square grid.
Gains stay in dB in memory and on disk and are converted to linear power
gains only on lookup.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CkmError, OutOfMapError
from .geometry import Area, Building, chord_length

CSV_HEADER = ("x_m", "y_m", "gain_db")
_GRID_RTOL = 1e-6
_BOUNDS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GridCkm:
    """Gain map sampled at ``origin + spacing * (i, j)``.

    ``gains[i, j]`` is the gain in dB at ``x = origin[0] + i*spacing``,
    ``y = origin[1] + j*spacing``.
    """

    origin: tuple[float, float]
    spacing: float
    gains: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise CkmError(f"grid spacing must be positive, got {self.spacing}")
        gains = np.array(self.gains, dtype=float)
        if gains.ndim != 2 or gains.shape[0] < 2 or gains.shape[1] < 2:
            raise CkmError(f"gain grid must be at least 2x2, got shape {gains.shape}")
        if not np.all(np.isfinite(gains)):
            raise CkmError("gain grid contains non-finite values")
        if np.any(gains > 0.0):
            raise CkmError("channel gains must be <= 0 dB")
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def nx(self) -> int:
        return self.gains.shape[0]

    @property
    def ny(self) -> int:
        return self.gains.shape[1]

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def extent(self) -> Area:
        """Region where lookups are defined (node box grown by half a cell)."""
        h = 0.5 * self.spacing
        return Area(
            self.origin[0] - h,
            self.origin[0] + (self.nx - 1) * self.spacing + h,
            self.origin[1] - h,
            self.origin[1] + (self.ny - 1) * self.spacing + h,
        )

    def covers(self, area: Area) -> bool:
        ext = self.extent()
        return (
            area.xmin >= ext.xmin - _BOUNDS_TOL
            and area.xmax <= ext.xmax + _BOUNDS_TOL
            and area.ymin >= ext.ymin - _BOUNDS_TOL
            and area.ymax <= ext.ymax + _BOUNDS_TOL
        )

    def nearest_index(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Grid indices of the nearest node to each point.

        On a square grid the Euclidean nearest node is the per-axis nearest
        one. Midpoint ties go to the smaller index (smaller x, then smaller y).
        """
        p = np.asarray(points, dtype=float)
        self._check_inside(p)
        u = (p[..., 0] - self.origin[0]) / self.spacing
        v = (p[..., 1] - self.origin[1]) / self.spacing
        i = np.clip(np.ceil(u - 0.5), 0, self.nx - 1).astype(np.intp)
        j = np.clip(np.ceil(v - 0.5), 0, self.ny - 1).astype(np.intp)
        return i, j

    def gain_db(self, points, method: str = "nearest"):
        p = np.asarray(points, dtype=float)
        if method == "nearest":
            i, j = self.nearest_index(p)
            return self.gains[i, j]
        if method == "bilinear":
            return self._bilinear_db(p)
        raise ValueError(f"unknown interpolation method {method!r}")

    def gain(self, points, method: str = "nearest"):
        """Linear power gain at ``points`` (shape ``(..., 2)``)."""
        return 10.0 ** (self.gain_db(points, method) / 10.0)

    def _check_inside(self, p):
        if not np.all(self.extent().contains(p, tol=_BOUNDS_TOL)):
            bad = p[~self.extent().contains(p, tol=_BOUNDS_TOL)] if p.ndim > 1 else p
            raise OutOfMapError(f"query outside map extent {self.extent()}: {np.asarray(bad)[:3]}")

    def _bilinear_db(self, p):
        self._check_inside(p)
        u = np.clip((p[..., 0] - self.origin[0]) / self.spacing, 0, self.nx - 1)
        v = np.clip((p[..., 1] - self.origin[1]) / self.spacing, 0, self.ny - 1)
        i0 = np.minimum(np.floor(u).astype(np.intp), self.nx - 2)
        j0 = np.minimum(np.floor(v).astype(np.intp), self.ny - 2)
        a = u - i0
        b = v - j0
        g = self.gains
        return (
            (1 - a) * (1 - b) * g[i0, j0]
            + a * (1 - b) * g[i0 + 1, j0]
            + (1 - a) * b * g[i0, j0 + 1]
            + a * b * g[i0 + 1, j0 + 1]
        )


def lookup_gain(ckm: GridCkm, q, method: str = "nearest"):
    """Linear gain of the map at horizontal location(s) ``q``.

    Raises :class:`OutOfMapError` for queries further than half a grid cell
    outside the node box.
    """
    g = ckm.gain(q, method)
    return float(g) if np.ndim(g) == 0 else g


# -- CSV I/O -----------------------------------------------------------------


def _fmt(value: float, decimals: int | None = None) -> str:
    if decimals is not None:
        value = round(value, decimals)
    if value == 0.0:
        value = 0.0  # drop negative zero
    return np.format_float_positional(value, trim="-")


def _uniform_axis(values: np.ndarray, axis: str) -> tuple[float, float, int]:
    coords = np.unique(np.round(values, 6))
    if coords.size < 2:
        raise CkmError(f"grid needs at least two distinct {axis} coordinates")
    steps = np.diff(coords)
    spacing = (coords[-1] - coords[0]) / (coords.size - 1)
    if np.any(np.abs(steps - spacing) > _GRID_RTOL * spacing):
        raise CkmError(f"non-uniform grid along {axis}: steps {np.unique(steps)[:5]}")
    return float(coords[0]), float(spacing), coords.size


def load_ckm(path) -> GridCkm:
    """Read a CKM from the ``x_m,y_m,gain_db`` CSV format."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise CkmError(f"{path}:1: expected header {','.join(CSV_HEADER)}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise CkmError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise CkmError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise CkmError(f"{path}: no grid nodes")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise CkmError(f"{path}: non-finite value in map")

    x0, sx, nx = _uniform_axis(data[:, 0], "x")
    y0, sy, ny = _uniform_axis(data[:, 1], "y")
    if abs(sx - sy) > _GRID_RTOL * max(sx, sy):
        raise CkmError(f"{path}: x spacing {sx} differs from y spacing {sy}")
    spacing = sx

    i = np.rint((data[:, 0] - x0) / spacing).astype(np.intp)
    j = np.rint((data[:, 1] - y0) / spacing).astype(np.intp)
    off = np.hypot(data[:, 0] - (x0 + i * spacing), data[:, 1] - (y0 + j * spacing))
    if np.any(off > _GRID_RTOL * spacing):
        raise CkmError(f"{path}: nodes off the uniform grid")
    gains = np.full((nx, ny), np.nan)
    seen = np.zeros((nx, ny), dtype=int)
    np.add.at(seen, (i, j), 1)
    if np.any(seen > 1):
        raise CkmError(f"{path}: duplicated grid node")
    if np.any(seen == 0):
        ii, jj = np.argwhere(seen == 0)[0]
        raise CkmError(f"{path}: missing grid node at ({x0 + ii * spacing}, {y0 + jj * spacing})")
    gains[i, j] = data[:, 2]
    return GridCkm((x0, y0), spacing, gains)


def dumps_ckm(ckm: GridCkm) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    xs, ys = ckm.xs, ckm.ys
    for j in range(ckm.ny):
        y = _fmt(ys[j], 6)
        for i in range(ckm.nx):
            buf.write(f"{_fmt(xs[i], 6)},{y},{_fmt(ckm.gains[i, j])}\n")
    return buf.getvalue()


def save_ckm(ckm: GridCkm, path) -> None:
    """Write ``ckm`` as CSV, rows ordered by y then x, LF line endings."""
    Path(path).write_bytes(dumps_ckm(ckm).encode("utf-8"))


# -- synthetic maps ----------------------------------------------------------


@dataclass(frozen=True)
class BuildingScene:
    """City block model used to synthesise CKMs.

    Every link GBS -> grid node loses ``beta0_db - 10 log10(d^2)`` plus,
    when the open segment touches any building, a fixed ``blockage_db`` and
    ``penetration_db_per_m`` for each metre travelled inside buildings.
    """

    area: Area
    buildings: tuple[Building, ...] = ()
    beta0_db: float = -30.0
    blockage_db: float = 20.0
    penetration_db_per_m: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))
        if self.blockage_db < 0 or self.penetration_db_per_m < 0:
            raise ValueError("blockage penalties must be non-negative")
        if not np.isfinite(self.beta0_db):
            raise ValueError("reference gain must be finite")
        for b in self.buildings:
            inside = (
                b.xmin >= self.area.xmin - _BOUNDS_TOL
                and b.xmax <= self.area.xmax + _BOUNDS_TOL
                and b.ymin >= self.area.ymin - _BOUNDS_TOL
                and b.ymax <= self.area.ymax + _BOUNDS_TOL
            )
            if not inside:
                raise ValueError(f"building {b} lies outside the scene area")

    @property
    def max_height(self) -> float:
        return max((b.height for b in self.buildings), default=0.0)


def blockage_loss_db(scene: BuildingScene, gbs_location, points3d) -> np.ndarray:
    """Blockage penalty plus penetration loss for each link GBS -> point."""
    pts = np.atleast_2d(np.asarray(points3d, dtype=float))
    blocked = np.zeros(pts.shape[0], dtype=bool)
    inside = np.zeros(pts.shape[0])
    for b in scene.buildings:
        length, hit = chord_length(gbs_location, pts, b)
        blocked |= hit
        inside += length
    return np.where(blocked, scene.blockage_db, 0.0) + scene.penetration_db_per_m * inside


def grid_axes(area: Area, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """Node coordinates of the smallest grid anchored at the area corner that covers it."""
    nx = max(int(math.ceil(area.width / spacing - 1e-9)) + 1, 2)
    ny = max(int(math.ceil(area.height / spacing - 1e-9)) + 1, 2)
    return area.xmin + spacing * np.arange(nx), area.ymin + spacing * np.arange(ny)


def generate_synthetic_ckm(
    scene: BuildingScene,
    gbs_location,
    altitude: float,
    spacing: float,
    allow_low_altitude: bool = False,
) -> GridCkm:
    """Free-space (exponent 2) map with additive building losses.

    The grid is anchored at the lower-left corner of ``scene.area`` and
    extends far enough to cover the whole area.
    """
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    if altitude <= scene.max_height and not allow_low_altitude:
        raise ValueError(
            f"altitude {altitude} m does not clear the tallest building ({scene.max_height} m)"
        )
    gbs = np.asarray(gbs_location, dtype=float)
    if gbs.shape != (3,):
        raise ValueError("gbs_location must be a 3D point")

    xs, ys = grid_axes(scene.area, spacing)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), np.full(X.size, float(altitude))], axis=1)
    d2 = np.sum((pts - gbs) ** 2, axis=1)
    if np.any(d2 == 0.0):
        raise ValueError("GBS coincides with a grid node; distance is zero")
    gain = scene.beta0_db - 10.0 * np.log10(d2) - blockage_loss_db(scene, gbs, pts)
    return GridCkm((xs[0], ys[0]), spacing, gain.reshape(X.shape))


def random_building_scene(
    rng: np.random.Generator,
    area: Area,
    n_buildings: int,
    size_range=(15.0, 45.0),
    height_range=(10.0, 45.0),
    **constants,
) -> BuildingScene:
    """Scene with ``n_buildings`` random (possibly overlapping) blocks inside ``area``."""
    blocks = []
    for _ in range(n_buildings):
        w, h = rng.uniform(*size_range, size=2)
        w, h = min(w, area.width), min(h, area.height)
        x0 = rng.uniform(area.xmin, area.xmax - w)
        y0 = rng.uniform(area.ymin, area.ymax - h)
        blocks.append(Building(x0, x0 + w, y0, y0 + h, float(rng.uniform(*height_range))))
    return BuildingScene(area, tuple(blocks), **constants)


# -- scene files -------------------------------------------------------------


@dataclass(frozen=True)
class SceneFile:
    """Contents of a scene file: the city model plus optional GBS metadata."""

    scene: BuildingScene
    gbs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    gbs_height: float = 2.0
    altitude: float | None = None

    def gbs_location(self, k: int) -> np.ndarray:
        return np.array([self.gbs[k, 0], self.gbs[k, 1], self.gbs_height])


def load_scene_file(path) -> SceneFile:
    from .config import parse_scene_file  # config owns the TOML handling

    return parse_scene_file(path)


def dumps_scene(scene: BuildingScene, gbs=None, gbs_height: float = 2.0, altitude=None) -> str:
    a = scene.area
    lines = [
        f"area = [{_fmt(a.xmin)}, {_fmt(a.xmax)}, {_fmt(a.ymin)}, {_fmt(a.ymax)}]",
        f"beta0_db = {_fmt(scene.beta0_db)}",
        f"blockage_db = {_fmt(scene.blockage_db)}",
        f"penetration_db_per_m = {_fmt(scene.penetration_db_per_m)}",
        f"gbs_height_m = {_fmt(gbs_height)}",
    ]
    if altitude is not None:
        lines.append(f"altitude_m = {_fmt(altitude)}")
    for b in scene.buildings:
        lines += [
            "",
            "[[building]]",
            f"xmin = {_fmt(b.xmin, 6)}",
            f"xmax = {_fmt(b.xmax, 6)}",
            f"ymin = {_fmt(b.ymin, 6)}",
            f"ymax = {_fmt(b.ymax, 6)}",
            f"height_m = {_fmt(b.height, 6)}",
        ]
    for x, y in np.asarray(gbs if gbs is not None else np.zeros((0, 2))):
        lines += ["", "[[gbs]]", f"x_m = {_fmt(x, 6)}", f"y_m = {_fmt(y, 6)}"]
    return "\n".join(lines) + "\n"


def save_scene(scene: BuildingScene, path, gbs=None, gbs_height: float = 2.0, altitude=None) -> None:
    Path(path).write_bytes(dumps_scene(scene, gbs, gbs_height, altitude).encode("utf-8"))
