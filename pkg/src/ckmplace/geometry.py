"""Axis-aligned areas, building prisms and segment/prism intersection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class Area:
    """Closed axis-aligned rectangle ``[xmin, xmax] x [ymin, ymax]`` in metres."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        vals = (self.xmin, self.xmax, self.ymin, self.ymax)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"area bounds must be finite, got {vals}")
        if self.xmax < self.xmin or self.ymax < self.ymin:
            raise ValueError(f"area bounds are inverted: {vals}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.xmin, self.ymin])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.xmax, self.ymax])

    def contains(self, points, tol: float = FEAS_TOL) -> np.ndarray:
        """Closed membership test for points of shape ``(..., 2)``."""
        p = np.asarray(points, dtype=float)
        return (
            (p[..., 0] >= self.xmin - tol)
            & (p[..., 0] <= self.xmax + tol)
            & (p[..., 1] >= self.ymin - tol)
            & (p[..., 1] <= self.ymax + tol)
        )

    def clip(self, points) -> np.ndarray:
        return np.clip(np.asarray(points, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Uniform draws of shape ``(*size, 2)``."""
        size = (size,) if np.isscalar(size) else tuple(size)
        u = rng.random(size + (2,))
        return self.lower + u * (self.upper - self.lower)

    def lattice_axes(self, step: float) -> tuple[np.ndarray, np.ndarray]:
        """Lattice coordinates ``xmin + i*step`` that stay inside the area."""
        if not step > 0:
            raise ValueError(f"lattice step must be positive, got {step}")
        nx = int(np.floor(self.width / step + 1e-9)) + 1
        ny = int(np.floor(self.height / step + 1e-9)) + 1
        return self.xmin + step * np.arange(nx), self.ymin + step * np.arange(ny)


@dataclass(frozen=True)
class Building:
    """Rectangular prism standing on the ground plane (z from 0 to ``height``)."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    height: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"building footprint is empty: {self}")
        if not self.height > 0:
            raise ValueError(f"building height must be positive, got {self.height}")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.xmin, self.ymin, 0.0])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.xmax, self.ymax, self.height])


def segment_box_interval(origin, ends, lower, upper):
    """Parameter interval of segments ``origin -> ends`` lying inside a closed box.

    Segments are parametrised as ``origin + t * (end - origin)``, ``t`` in [0, 1].
    Returns ``(t_in, t_out, hit)`` arrays over the leading axes of ``ends``;
    ``hit`` is true iff some ``t`` in the *open* interval (0, 1) lands in the
    closed box, so touching a face or an edge counts as a hit.
    """
    o = np.asarray(origin, dtype=float)
    e = np.atleast_2d(np.asarray(ends, dtype=float))
    d = e - o
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)

    t_in = np.full(e.shape[0], -np.inf)
    t_out = np.full(e.shape[0], np.inf)
    for ax in range(3):
        da = d[:, ax]
        flat = da == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[ax] - o[ax]) / da
            t2 = (hi[ax] - o[ax]) / da
        a = np.where(flat, -np.inf, np.minimum(t1, t2))
        b = np.where(flat, np.inf, np.maximum(t1, t2))
        # a segment parallel to the slab is either always or never inside it
        outside = flat & ((o[ax] < lo[ax]) | (o[ax] > hi[ax]))
        a = np.where(outside, np.inf, a)
        b = np.where(outside, -np.inf, b)
        t_in = np.maximum(t_in, a)
        t_out = np.minimum(t_out, b)

    hit = (t_in <= t_out) & (t_in < 1.0) & (t_out > 0.0)
    return np.clip(t_in, 0.0, 1.0), np.clip(t_out, 0.0, 1.0), hit


def chord_length(origin, ends, building: Building):
    """Length of each segment inside ``building`` and whether it is blocked."""
    t_in, t_out, hit = segment_box_interval(origin, ends, building.lower, building.upper)
    seg_len = np.linalg.norm(np.atleast_2d(ends) - np.asarray(origin, dtype=float), axis=1)
    length = np.where(hit, (t_out - t_in) * seg_len, 0.0)
    return length, hit
