"""Multi-UAV uplink model: SINR, per-link rate and weighted sum rate.

UAV ``j`` transmits to its own GBS ``j`` over a shared band, so every other
UAV interferes at GBS ``k``. Indices are 0-based throughout.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasiblePlacementError
from .geometry import FEAS_TOL, Area


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


class EvaluationCounter:
    """Thread-safe tally of objective evaluations."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        with self._lock:
            return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


evaluations = EvaluationCounter()


@dataclass(frozen=True, eq=False)
class NetworkScene:
    """Static description of the network; ``ckms[k]`` is GBS ``k``'s gain map.

    Any object with a ``gain(points, method)`` method returning linear gains
    can stand in for a map (see :class:`ckmplace.baselines.LosMap`).
    """

    gbs: np.ndarray
    ckms: tuple
    powers: np.ndarray
    noise: np.ndarray
    weights: np.ndarray
    area: Area
    altitude: float = 50.0
    gbs_height: float = 2.0
    interpolation: str = "nearest"

    def __post_init__(self):
        gbs = np.array(self.gbs, dtype=float).reshape(-1, 2)
        K = gbs.shape[0]
        if K < 1:
            raise ValueError("need at least one UAV/GBS pair")
        arrays = {}
        for name in ("powers", "noise", "weights"):
            a = np.array(np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (K,)))
            if not np.all(a > 0):
                raise ValueError(f"{name} must be strictly positive, got {a}")
            a.setflags(write=False)
            arrays[name] = a
        if len(self.ckms) != K:
            raise ValueError(f"expected {K} maps, got {len(self.ckms)}")
        for k, m in enumerate(self.ckms):
            covers = getattr(m, "covers", None)
            if covers is not None and not covers(self.area):
                raise ValueError(f"map of GBS {k} does not cover the area {self.area}")
        gbs.setflags(write=False)
        object.__setattr__(self, "gbs", gbs)
        object.__setattr__(self, "ckms", tuple(self.ckms))
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    @property
    def K(self) -> int:
        return self.gbs.shape[0]

    @property
    def n(self) -> int:
        return 2 * self.K

    def with_powers(self, powers) -> "NetworkScene":
        return replace(self, powers=powers)

    def with_maps(self, maps) -> "NetworkScene":
        return replace(self, ckms=tuple(maps))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Box bounds of the stacked ``(x1, y1, ..., xK, yK)`` vector."""
        return np.tile(self.area.lower, self.K), np.tile(self.area.upper, self.K)


@dataclass(frozen=True, eq=False)
class Placement:
    """Horizontal UAV locations, shape ``(K, 2)``."""

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1, 2)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_vector(cls, x) -> "Placement":
        return cls(np.asarray(x, dtype=float).reshape(-1, 2))

    @property
    def vector(self) -> np.ndarray:
        return self.q.reshape(-1).copy()

    @property
    def K(self) -> int:
        return self.q.shape[0]

    def __repr__(self):
        return f"Placement({self.q.tolist()})"


def check_feasible(scene: NetworkScene, placement: Placement) -> None:
    if placement.K != scene.K:
        raise ValueError(f"placement has {placement.K} UAVs, scene has {scene.K}")
    if not np.all(scene.area.contains(placement.q, tol=FEAS_TOL)):
        raise InfeasiblePlacementError(f"{placement} leaves the area {scene.area}")


def gain_matrix(scene: NetworkScene, q) -> np.ndarray:
    """``h[..., k, j]``: linear gain from UAV ``j`` at ``q[..., j, :]`` to GBS ``k``."""
    q = np.asarray(q, dtype=float)
    return np.stack([m.gain(q, scene.interpolation) for m in scene.ckms], axis=-2)


def _sinr_from_gains(h, powers, noise):
    rx = h * powers  # received power at GBS k from UAV j
    K = rx.shape[-1]
    desired = np.diagonal(rx, axis1=-2, axis2=-1)
    # mask rather than subtract: a dominant desired term would swamp the difference
    interference = np.where(np.eye(K, dtype=bool), 0.0, rx).sum(axis=-1)
    return desired / (interference + noise)


def sinr_all(scene: NetworkScene, placement: Placement) -> np.ndarray:
    check_feasible(scene, placement)
    return _sinr_from_gains(gain_matrix(scene, placement.q), scene.powers, scene.noise)


def sinr(scene: NetworkScene, placement: Placement, k: int) -> float:
    """SINR at GBS ``k`` (0-based)."""
    if not 0 <= k < scene.K:
        raise IndexError(f"link index {k} out of range for K={scene.K}")
    return float(sinr_all(scene, placement)[k])


def rates(scene: NetworkScene, placement: Placement) -> np.ndarray:
    """Per-link achievable rates in bps/Hz."""
    return np.log2(1.0 + sinr_all(scene, placement))


def rate(scene: NetworkScene, placement: Placement, k: int) -> float:
    return float(np.log2(1.0 + sinr(scene, placement, k)))


def weighted_sum_rate(scene: NetworkScene, placement: Placement) -> float:
    """Objective ``sum_k alpha_k r_k``; every call counts as one evaluation."""
    value = float(scene.weights @ rates(scene, placement))
    evaluations.add(1)
    return value


def weighted_sum_rate_batch(scene: NetworkScene, q) -> np.ndarray:
    """Objective for a batch of placements ``q`` of shape ``(B, K, 2)``."""
    q = np.asarray(q, dtype=float)
    if not np.all(scene.area.contains(q, tol=FEAS_TOL)):
        raise InfeasiblePlacementError("batch contains placements outside the area")
    g = _sinr_from_gains(gain_matrix(scene, q), scene.powers, scene.noise)
    values = np.log2(1.0 + g) @ scene.weights
    evaluations.add(int(np.prod(q.shape[:-2])))
    return values
