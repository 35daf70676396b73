"""Derivative-free trust-region maximisation with quadratic interpolation models.

Each iteration fits ``phi(x + s) = f(x) + g's + 1/2 s'Gs`` through the local
point ``x`` and the ``m - 1`` points of the interpolation set, where
``m = (n + 1)(n + 2) / 2``, maximises ``phi`` over the trust region
intersected with the box bounds, and evaluates the objective once at the
trial point. The interpolation set, the local point and the radius are then
updated:

* improvement: the old local point replaces the set point furthest from it,
  and the trial point becomes the new local point;
* no improvement: the radius shrinks by ``beta`` and the trial point replaces
  the furthest set point, provided it is not further away than that point;
* if the radius has fallen below ``epsilon`` while some set point is still
  more than ``epsilon`` away from the local point, the radius is reset to
  ``delta0``. The loop stops once the radius is below ``epsilon`` and every
  set point lies within ``epsilon`` of the local point.

The reset fires when *some* point is still far away. Reading the guard as
"every point is far away" would leave runs with a tiny radius that can
neither reset nor terminate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateSetError
from .network import NetworkScene, Placement, weighted_sum_rate
from .trs import TrsProblem, project, solve_trs

COND_MAX = 1e12
RESIDUAL_RTOL = 1e-8
REPAIR_RETRIES = 50
INIT_RETRIES = 100


def n_params(n: int) -> int:
    """Number of interpolation conditions ``m`` for a full quadratic in ``n`` variables."""
    return (n + 1) * (n + 2) // 2


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    f0: float
    g: np.ndarray
    G: np.ndarray

    @property
    def n(self) -> int:
        return self.g.size

    def __call__(self, s):
        """Model value at displacement(s) ``s`` from the local point."""
        s = np.asarray(s, dtype=float)
        return self.f0 + s @ self.g + 0.5 * np.einsum("...i,ij,...j->...", s, self.G, s)


@dataclass(eq=False)
class InterpolationSet:
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.points = np.array(self.points, dtype=float)
        self.values = np.array(self.values, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] != self.values.shape[0]:
            raise ValueError("points and values disagree in shape")

    def __len__(self):
        return self.points.shape[0]

    def replace(self, index: int, point, value: float) -> None:
        self.points[index] = point
        self.values[index] = value

    def copy(self) -> "InterpolationSet":
        return InterpolationSet(self.points.copy(), self.values.copy())


@dataclass
class TrustRegion:
    """Radius schedule: ``delta`` shrinks by ``beta`` and resets to ``delta0``."""

    delta0: float
    beta: float = 0.5
    epsilon: float = 1.0
    max_iters: int = 500
    delta: float | None = None

    def __post_init__(self):
        if not self.delta0 > 0:
            raise ValueError(f"delta0 must be positive, got {self.delta0}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.delta is None:
            self.delta = self.delta0
        if not 0 < self.delta <= self.delta0:
            raise ValueError(f"delta must lie in (0, delta0], got {self.delta}")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    delta: float
    accepted: bool
    evaluations: int
    x: np.ndarray
    converged: bool = False


# -- interpolation -------------------------------------------------------------


def _design_matrix(D: np.ndarray) -> np.ndarray:
    """Rows ``[d, d_i d_j (i<j), d_i^2 / 2]`` so that ``row @ params = g'd + 1/2 d'Gd``."""
    n = D.shape[1]
    iu, ju = np.triu_indices(n)
    quad = D[:, iu] * D[:, ju]
    quad[:, iu == ju] *= 0.5
    return np.hstack([D, quad])


def interpolation_matrix(center, points) -> tuple[np.ndarray, float]:
    """System matrix in displacements scaled by the largest distance.

    Returns ``(M, scale)``; the scaling makes the conditioning independent of
    the units and of how far the set has contracted.
    """
    D = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    scale = float(np.max(np.linalg.norm(D, axis=1))) if D.size else 0.0
    if scale == 0.0:
        return _design_matrix(D), 1.0
    return _design_matrix(D / scale), scale


def check_nondegenerate(center, sigma: InterpolationSet, cond_max: float = COND_MAX) -> bool:
    """True iff the interpolation system is square and well conditioned."""
    n = np.asarray(center).size
    if len(sigma) != n_params(n) - 1:
        return False
    M, _ = interpolation_matrix(center, sigma.points)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(M)
    return bool(np.isfinite(cond) and cond < cond_max)


def build_model(center, f_center: float, sigma: InterpolationSet, cond_max: float = COND_MAX) -> QuadraticModel:
    """Quadratic through ``(center, f_center)`` and every point of ``sigma``."""
    center = np.asarray(center, dtype=float)
    n = center.size
    if len(sigma) != n_params(n) - 1:
        raise DegenerateSetError(f"need {n_params(n) - 1} points for n={n}, got {len(sigma)}")
    M, scale = interpolation_matrix(center, sigma.points)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(M)
    if not (np.isfinite(cond) and cond < cond_max):
        raise DegenerateSetError(f"interpolation matrix condition number {cond:.3g}")
    rhs = sigma.values - f_center
    params = np.linalg.solve(M, rhs)

    g = params[:n] / scale
    G = np.zeros((n, n))
    iu, ju = np.triu_indices(n)
    G[iu, ju] = params[n:] / scale**2
    G = G + np.triu(G, 1).T
    model = QuadraticModel(float(f_center), g, G)

    resid = np.abs(model(sigma.points - center) - sigma.values)
    tol = RESIDUAL_RTOL * max(1.0, float(np.max(np.abs(sigma.values))), abs(f_center))
    if np.any(resid > tol):
        raise DegenerateSetError(f"interpolation residual {resid.max():.3g} exceeds {tol:.3g}")
    return model


def furthest_point(sigma: InterpolationSet, center) -> int:
    """Index of the set point furthest from ``center``; lowest index on ties."""
    d = np.linalg.norm(sigma.points - np.asarray(center, dtype=float), axis=1)
    return int(np.argmax(d))


# -- optimiser state -------------------------------------------------------------


class CountingObjective:
    """Wraps an objective and counts the calls made through it."""

    def __init__(self, fun: Callable[[np.ndarray], float]):
        self.fun = fun
        self.count = 0

    def __call__(self, x) -> float:
        self.count += 1
        return float(self.fun(np.asarray(x, dtype=float)))


def _draw_points(rng, lower, upper, size):
    return lower + rng.random((size, lower.size)) * (upper - lower)


def initial_interpolation_set(objective, center, lower, upper, rng, retries: int = INIT_RETRIES) -> InterpolationSet:
    """``m - 1`` uniform draws over the box, redrawn until non-degenerate.

    Only the accepted draw is evaluated.
    """
    center = np.asarray(center, dtype=float)
    count = n_params(center.size) - 1
    for _ in range(retries):
        pts = _draw_points(rng, lower, upper, count)
        probe = InterpolationSet(pts, np.zeros(count))
        if check_nondegenerate(center, probe):
            return InterpolationSet(pts, [objective(p) for p in pts])
    raise DegenerateSetError(f"no non-degenerate interpolation set after {retries} draws")


@dataclass(eq=False)
class DfoState:
    """Mutable optimiser state; advance it with :func:`step`."""

    objective: CountingObjective
    x: np.ndarray
    fx: float
    sigma: InterpolationSet
    region: TrustRegion
    lower: np.ndarray
    upper: np.ndarray
    seed: int = 0
    iteration: int = 0
    converged: bool = False
    repairs: int = 0
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng([self.seed, 1])

    @property
    def evaluations(self) -> int:
        return self.objective.count

    def set_converged(self) -> bool:
        d = np.linalg.norm(self.sigma.points - self.x, axis=1)
        return bool(np.all(d <= self.region.epsilon))


def start(objective, x0, lower, upper, region: TrustRegion, seed: int = 0, best_start: bool = False) -> DfoState:
    """Evaluate the starting point and draw the initial interpolation set.

    With ``best_start`` the best of ``x0`` and the initial set becomes the
    local point (``x0`` takes its slot in the set); this costs no extra
    evaluations.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 < lower - 1e-9) or np.any(x0 > upper + 1e-9):
        raise ValueError("starting point lies outside the bounds")
    x0 = np.clip(x0, lower, upper)
    obj = objective if isinstance(objective, CountingObjective) else CountingObjective(objective)
    rng = np.random.default_rng([seed, 0])
    fx = obj(x0)
    sigma = initial_interpolation_set(obj, x0, lower, upper, rng)
    if best_start:
        top = int(np.argmax(sigma.values))
        if sigma.values[top] > fx:
            x_new, f_new = sigma.points[top].copy(), float(sigma.values[top])
            sigma.replace(top, x0, fx)
            if check_nondegenerate(x_new, sigma):
                x0, fx = x_new, f_new
            else:
                sigma.replace(top, x_new, f_new)
    return DfoState(obj, x0, fx, sigma, region, lower, upper, seed=seed)


def _repair(state: DfoState, index: int) -> None:
    """Redraw the most recently inserted point until the set is usable again.

    If no single redraw helps, every point is redrawn around the local point.

    Draws are uniform over the bounds intersected with the cube spanned by
    the current set radius around the local point; a far draw next to a
    contracted set would make the system worse conditioned, not better.
    """
    others = np.delete(state.sigma.points, index, axis=0)
    radius = max(float(np.max(np.abs(others - state.x))), state.region.epsilon)
    lo = np.maximum(state.lower, state.x - radius)
    hi = np.minimum(state.upper, state.x + radius)
    for _ in range(REPAIR_RETRIES):
        p = _draw_points(state.rng, lo, hi, 1)[0]
        state.sigma.replace(index, p, np.nan)
        if check_nondegenerate(state.x, state.sigma):
            state.sigma.values[index] = state.objective(p)
            state.repairs += 1
            return
    # the remaining points are themselves badly placed: rebuild the whole set
    radius = max(state.region.delta, state.region.epsilon)
    lo = np.maximum(state.lower, state.x - radius)
    hi = np.minimum(state.upper, state.x + radius)
    state.sigma = initial_interpolation_set(state.objective, state.x, lo, hi, state.rng)
    state.repairs += 1


def _geometry_step(state: DfoState, problem: TrsProblem) -> np.ndarray:
    """Random feasible step of length up to ``delta`` for a model with no ascent.

    Evaluating the local point again would teach nothing and would put a
    duplicate into the set; a step in a random direction still costs one
    evaluation but lets the set contract around the local point.
    """
    n = state.x.size
    for _ in range(REPAIR_RETRIES):
        d = state.rng.standard_normal(n)
        s = project(problem, problem.delta * d / np.linalg.norm(d))[0]
        if np.any(s):
            return s
    return np.zeros(n)


def step(state: DfoState) -> IterationRecord:
    """Run one iteration in place and return its record."""
    region = state.region
    x, fx, sigma = state.x, state.fx, state.sigma
    model = build_model(x, fx, sigma)

    problem = TrsProblem(model.g, model.G, x, region.delta, state.lower, state.upper)
    s = solve_trs(problem, seed=[state.seed, 2, state.iteration])
    if not np.any(s):
        s = _geometry_step(state, problem)
    trial = np.clip(x + s, state.lower, state.upper)
    s = trial - x
    f_trial = state.objective(trial)

    out = furthest_point(sigma, x)
    inserted = None
    accepted = f_trial > fx
    if accepted:
        sigma.replace(out, x, fx)
        state.x, state.fx = trial, f_trial
        inserted = out
    else:
        region.delta *= region.beta
        if np.linalg.norm(sigma.points[out] - x) >= np.linalg.norm(s):
            sigma.replace(out, trial, f_trial)
            inserted = out
    if inserted is not None and not check_nondegenerate(state.x, sigma):
        _repair(state, inserted)

    if region.delta < region.epsilon:
        if state.set_converged():
            state.converged = True
        else:
            region.delta = region.delta0

    state.iteration += 1
    return IterationRecord(
        iteration=state.iteration,
        objective=state.fx,
        delta=region.delta,
        accepted=bool(accepted),
        evaluations=state.evaluations,
        x=state.x.copy(),
        converged=state.converged,
    )


@dataclass
class DfoResult:
    x: np.ndarray
    fx: float
    records: list
    evaluations: int
    converged: bool
    wall_ms: float


def maximize(objective, x0, lower, upper, region: TrustRegion, seed: int = 0, sink=None, best_start: bool = False) -> DfoResult:
    """Maximise ``objective`` over the box ``[lower, upper]`` starting at ``x0``.

    ``sink``, if given, receives each :class:`IterationRecord` as it is made.
    The returned point is the final local point, which carries the best
    objective value evaluated as a local point.
    """
    t0 = time.perf_counter()
    region = TrustRegion(region.delta0, region.beta, region.epsilon, region.max_iters)
    state = start(objective, x0, lower, upper, region, seed, best_start)
    records = []
    while state.iteration < region.max_iters and not state.converged:
        rec = step(state)
        records.append(rec)
        if sink is not None:
            sink(rec)
    wall_ms = (time.perf_counter() - t0) * 1e3
    return DfoResult(state.x.copy(), state.fx, records, state.evaluations, state.converged, wall_ms)


# -- placement ---------------------------------------------------------------------


def default_region(scene: NetworkScene, **overrides) -> TrustRegion:
    """Defaults: ``delta0`` a quarter of the shorter side of the area, ``epsilon`` 1 m."""
    params = {"delta0": 0.25 * min(scene.area.width, scene.area.height), "beta": 0.5, "epsilon": 1.0, "max_iters": 500}
    params.update({k: v for k, v in overrides.items() if v is not None})
    return TrustRegion(**params)


def run(
    scene: NetworkScene,
    q0: Placement | None = None,
    region: TrustRegion | None = None,
    seed: int = 0,
    sink=None,
    best_start: bool = False,
):
    """Optimise UAV placement for the weighted sum rate.

    ``q0`` defaults to hovering above the GBSs, projected into the area.
    Returns ``(placement, DfoResult)``.
    """
    if q0 is None:
        q0 = Placement(scene.area.clip(scene.gbs))
    if region is None:
        region = default_region(scene)
    lower, upper = scene.bounds()

    def objective(x):
        return weighted_sum_rate(scene, Placement.from_vector(x))

    result = maximize(objective, q0.vector, lower, upper, region, seed=seed, sink=sink, best_start=best_start)
    return Placement.from_vector(result.x), result


def multistart(
    scene: NetworkScene,
    runs: int = 5,
    q0: Placement | None = None,
    region: TrustRegion | None = None,
    seed: int = 0,
    best_start: bool = False,
):
    """Best of ``runs`` independent runs with seeds ``seed, seed + 1, ...``.

    The first run starts from ``q0`` (hovering by default); the others start
    from placements drawn uniformly over the area with their own seed. Ties
    keep the earliest run. Returns ``(placement, best_result, all_results)``.
    """
    if runs < 1:
        raise ValueError(f"need at least one run, got {runs}")
    results = []
    for r in range(runs):
        s = seed + r
        start_at = q0 if r == 0 else Placement(scene.area.sample(np.random.default_rng([s, 7]), scene.K))
        results.append(run(scene, start_at, region, seed=s, best_start=best_start))
    best = max(range(runs), key=lambda i: (results[i][1].fx, -i))
    return results[best][0], results[best][1], [res for _, res in results]
