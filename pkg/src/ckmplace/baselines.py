"""Reference placement schemes: lattice exhaustive search, hovering, LoS design."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dfo
from .errors import BudgetExceededError, InfeasiblePlacementError
from .geometry import FEAS_TOL
from .network import NetworkScene, Placement, evaluations, weighted_sum_rate

DEFAULT_BUDGET = 200_000_000
_BLOCK = 4_000_000  # objective values computed per vectorised chunk


@dataclass(frozen=True)
class SearchGrid:
    """Lattice ``xmin + i*step`` by ``ymin + j*step`` inside the area."""

    xs: np.ndarray
    ys: np.ndarray

    @classmethod
    def over(cls, area, step: float) -> "SearchGrid":
        xs, ys = area.lattice_axes(step)
        return cls(xs, ys)

    @property
    def points(self) -> np.ndarray:
        """Candidates in lexicographic (x, then y) order, shape ``(M*N, 2)``."""
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def __len__(self):
        return self.xs.size * self.ys.size


@dataclass
class SearchResult:
    placement: Placement
    value: float
    evaluations: int


def _chunk_values(scene: NetworkScene, tables, first: np.ndarray) -> np.ndarray:
    """Objective over all placements whose first UAV index lies in ``first``.

    ``tables[k]`` holds GBS ``k``'s gain at every candidate. The result has
    shape ``(len(first), C, ..., C)`` with one axis per UAV.
    """
    K = scene.K
    C = tables[0].size

    def along(j, vec):
        shape = [1] * K
        shape[j] = -1
        return vec.reshape(shape)

    total = 0.0
    for k in range(K):
        rx = [along(j, scene.powers[j] * (tables[k][first] if j == 0 else tables[k])) for j in range(K)]
        interference = sum(rx[j] for j in range(K) if j != k)
        sinr = rx[k] / (interference + scene.noise[k])
        total = total + scene.weights[k] * np.log2(1.0 + sinr)
    shape = (first.size,) + (C,) * (K - 1)
    return np.broadcast_to(total, shape)


def exhaustive_search(
    scene: NetworkScene,
    grid: SearchGrid,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
) -> SearchResult:
    """Best lattice placement by full enumeration of ``(M N)^K`` combinations.

    Ties resolve to the lexicographically smallest stacked vector. Work is
    split into chunks of the first UAV's candidates; chunks may run on a
    thread pool, and their maxima are merged in chunk order so the answer
    does not depend on ``workers``.
    """
    cands = grid.points
    C, K = cands.shape[0], scene.K
    total = C**K
    if total > budget:
        raise BudgetExceededError(f"{C}^{K} = {total} evaluations exceed the budget of {budget}")
    if not np.all(scene.area.contains(cands, tol=FEAS_TOL)):
        raise InfeasiblePlacementError("search grid leaves the area")
    tables = [np.asarray(m.gain(cands, scene.interpolation), dtype=float) for m in scene.ckms]

    per_first = C ** (K - 1)
    rows = max(1, _BLOCK // per_first)
    chunks = [np.arange(a, min(a + rows, C)) for a in range(0, C, rows)]

    def best_of(first):
        vals = _chunk_values(scene, tables, first)
        flat = int(np.argmax(vals))
        return float(vals.reshape(-1)[flat]), np.unravel_index(flat, vals.shape), first

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(best_of, chunks))
    else:
        results = [best_of(c) for c in chunks]

    best_val, best_idx = -np.inf, None
    for val, idx, first in results:
        if val > best_val:
            best_val = val
            best_idx = (int(first[idx[0]]),) + tuple(int(i) for i in idx[1:])
    evaluations.add(total)
    return SearchResult(Placement(cands[list(best_idx)]), best_val, total)


def hovering_placement(scene: NetworkScene) -> Placement:
    """Each UAV directly above its own GBS."""
    if not np.all(scene.area.contains(scene.gbs, tol=FEAS_TOL)):
        raise InfeasiblePlacementError("a GBS lies outside the area, hovering is infeasible")
    return Placement(scene.gbs.copy())


def los_gain(q, w, altitude: float, gbs_height: float, beta0: float):
    """Free-space LoS gain ``beta0 / (||q - w||^2 + (H - Hgbs)^2)``; ``beta0`` is linear."""
    q = np.asarray(q, dtype=float)
    d2 = np.sum((q - np.asarray(w, dtype=float)) ** 2, axis=-1) + (altitude - gbs_height) ** 2
    if np.any(d2 == 0):
        raise ZeroDivisionError("UAV and GBS coincide; LoS gain is undefined")
    g = beta0 / d2
    return float(g) if np.ndim(g) == 0 else g


@dataclass(frozen=True)
class LosMap:
    """Drop-in replacement for a CKM that uses the LoS gain formula."""

    w: tuple[float, float]
    altitude: float
    gbs_height: float
    beta0: float

    def gain(self, points, method=None):
        return los_gain(points, self.w, self.altitude, self.gbs_height, self.beta0)


def los_scene(scene: NetworkScene, beta0_db: float = -30.0) -> NetworkScene:
    beta0 = 10.0 ** (beta0_db / 10.0)
    maps = [LosMap(tuple(w), scene.altitude, scene.gbs_height, beta0) for w in scene.gbs]
    return scene.with_maps(maps)


@dataclass
class LosDesign:
    placement: Placement
    los_value: float
    ckm_value: float
    evaluations: int
    lattice: SearchResult | None = None


def los_design(
    scene: NetworkScene,
    region: dfo.TrustRegion | None = None,
    seed: int = 0,
    beta0_db: float = -30.0,
    lattice_step: float | None = 5.0,
    budget: int = DEFAULT_BUDGET,
) -> LosDesign:
    """Placement optimised for the LoS model, then scored on the true maps.

    The LoS objective is maximised with the same derivative-free optimiser.
    For ``K <= 2`` an exhaustive LoS lattice search cross-checks it, and the
    better of the two LoS solutions is kept.
    """
    model = los_scene(scene, beta0_db)
    placement, res = dfo.run(model, hovering_placement(scene), region, seed=seed)
    best, best_val, evals = placement, res.fx, res.evaluations
    lattice = None
    if lattice_step is not None and scene.K <= 2:
        grid = SearchGrid.over(scene.area, lattice_step)
        if len(grid) ** scene.K <= budget:
            lattice = exhaustive_search(model, grid, budget)
            evals += lattice.evaluations
            if lattice.value > best_val:
                best, best_val = lattice.placement, lattice.value
    return LosDesign(best, best_val, weighted_sum_rate(scene, best), evals, lattice)


def lattice_snap(grid: SearchGrid, placement: Placement) -> Placement:
    """Nearest lattice node for every UAV."""
    def snap(axis, v):
        i = np.clip(np.ceil((v - axis[0]) / (axis[1] - axis[0]) - 0.5), 0, axis.size - 1).astype(int)
        return axis[i]

    q = placement.q
    return Placement(np.stack([snap(grid.xs, q[:, 0]), snap(grid.ys, q[:, 1])], axis=1))

