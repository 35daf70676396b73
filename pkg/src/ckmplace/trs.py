"""Approximate maximiser of a quadratic model over a ball intersected with a box.

The problem is

    max_s  g's + 1/2 s'Gs   s.t.  ||s|| <= delta,  lower <= center + s <= upper

with ``G`` symmetric and possibly indefinite. The solver combines a truncated
conjugate-gradient ascent with active-set restarts on box faces, a Cauchy
step, and a small batch of random feasible starts refined by projected
gradient ascent. The best feasible candidate wins, so the returned step is
never worse than ``s = 0`` or the Cauchy step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TrsProblem:
    g: np.ndarray
    G: np.ndarray
    center: np.ndarray
    delta: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"trust-region radius must be positive, got {self.delta}")
        for name in ("g", "G", "center", "lower", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def from_model(cls, model, center, delta, lower, upper) -> "TrsProblem":
        return cls(model.g, model.G, center, delta, lower, upper)

    @property
    def step_lower(self) -> np.ndarray:
        return np.minimum(self.lower - self.center, 0.0)

    @property
    def step_upper(self) -> np.ndarray:
        return np.maximum(self.upper - self.center, 0.0)

    def gain(self, s) -> np.ndarray:
        """Model increase ``g's + 1/2 s'Gs`` for steps of shape ``(..., n)``."""
        s = np.asarray(s, dtype=float)
        return s @ self.g + 0.5 * np.einsum("...i,ij,...j->...", s, self.G, s)


def make_feasible(problem: TrsProblem, s) -> np.ndarray:
    """Clip into the box, then shrink into the ball.

    Shrinking towards 0 keeps the point inside the box because 0 is in it.
    """
    s = np.clip(s, problem.step_lower, problem.step_upper)
    norm = np.linalg.norm(s, axis=-1, keepdims=True)
    scale = np.where(norm > problem.delta, problem.delta / np.maximum(norm, _TOL), 1.0)
    return s * scale


def project(problem: TrsProblem, X) -> np.ndarray:
    """Euclidean projection of steps onto the ball-box intersection.

    The projection is ``clip(c * x)`` with the largest ``c <= 1`` meeting the
    radius. ``||clip(c x)||`` is piecewise of the form ``sqrt(C + c^2 F)``
    between the values of ``c`` where components hit their bounds, so ``c``
    is solved exactly on the segment that contains it.
    """
    return _project(problem.step_lower, problem.step_upper, problem.delta, X)


def _project(lo, hi, delta, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.minimum(np.maximum(X, lo), hi)
    if np.all((Y * Y).sum(axis=1) <= delta * delta):
        return Y
    m, n = X.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        brk = np.where(X > 0, hi / X, np.where(X < 0, lo / X, np.inf))
    order = np.argsort(brk, axis=1)
    rows = np.arange(m)[:, None]
    seg = np.empty((m, n + 2))
    seg[:, 0] = 0.0
    seg[:, 1:-1] = brk[rows, order]
    seg[:, -1] = np.inf
    clipped = np.zeros((m, n + 1))
    np.cumsum((np.where(X > 0, hi, lo) ** 2)[rows, order], axis=1, out=clipped[:, 1:])
    free = np.zeros((m, n + 1))
    np.cumsum((X * X)[rows, order][:, ::-1], axis=1, out=free[:, -2::-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.sqrt(np.maximum(delta * delta - clipped, 0.0) / free)
    valid = (c >= seg[:, :-1] * (1 - 1e-12)) & (c <= seg[:, 1:] * (1 + 1e-12))
    # rows already inside the ball keep c = 1
    ck = np.minimum(c[np.arange(m), np.argmax(valid, axis=1)], 1.0)
    Y = np.minimum(np.maximum(ck[:, None] * X, lo), hi)
    # guard against rounding pushing the norm a hair past the radius
    norm = np.sqrt((Y * Y).sum(axis=1))
    return Y * np.where(norm > delta, delta / np.maximum(norm, _TOL), 1.0)[:, None]


def _ray_limit(s, p, delta, lo, hi):
    """Largest t >= 0 keeping ``s + t p`` in the ball, and in the box.

    Returns ``(t_ball, t_box, box_index)``; ``box_index`` is -1 if no face.
    """
    pp = p @ p
    sp = s @ p
    ss = s @ s
    disc = sp * sp + pp * max(delta * delta - ss, 0.0)
    t_ball = (-sp + np.sqrt(disc)) / pp
    with np.errstate(divide="ignore", invalid="ignore"):
        t_face = np.where(p > 0, (hi - s) / p, np.where(p < 0, (lo - s) / p, np.inf))
    t_face = np.maximum(t_face, 0.0)
    idx = int(np.argmin(t_face))
    return t_ball, float(t_face[idx]), (idx if np.isfinite(t_face[idx]) else -1)


def truncated_cg(problem: TrsProblem, max_restarts: int | None = None) -> np.ndarray:
    """Steihaug-style CG ascent that fixes a variable each time it hits a box face."""
    g, G, delta = problem.g, problem.G, problem.delta
    lo, hi = problem.step_lower, problem.step_upper
    n = g.size
    s = np.zeros(n)
    free = np.ones(n, dtype=bool)
    max_restarts = n if max_restarts is None else max_restarts

    for _ in range(max_restarts + 1):
        r = g + G @ s
        free &= ~((s <= lo + _TOL) & (r < 0)) & ~((s >= hi - _TOL) & (r > 0))
        r = np.where(free, r, 0.0)
        rr = r @ r
        if rr <= _TOL * _TOL:
            break
        p = r.copy()
        hit_face = False
        for _ in range(int(free.sum())):
            Gp = np.where(free, G @ p, 0.0)
            curv = p @ Gp
            t_ball, t_box, face = _ray_limit(s, p, delta, lo, hi)
            t_max = min(t_ball, t_box)
            t = t_max if curv >= 0 else min(rr / -curv, t_max)
            s = s + t * p
            if t >= t_max:
                if t_box <= t_ball and face >= 0:
                    s[face] = hi[face] if p[face] > 0 else lo[face]
                    free[face] = False
                    hit_face = True
                break
            r = r + t * Gp
            rr_new = r @ r
            if rr_new <= _TOL * _TOL:
                break
            p = r + (rr_new / rr) * p
            rr = rr_new
        if not hit_face:
            break
    return make_feasible(problem, s)


def cauchy_point(problem: TrsProblem) -> np.ndarray:
    """Best step along the model gradient ``g`` that stays in ball and box."""
    g, G = problem.g, problem.G
    gg = g @ g
    if gg <= _TOL * _TOL:
        return np.zeros_like(g)
    t_ball, t_box, _ = _ray_limit(np.zeros_like(g), g, problem.delta, problem.step_lower, problem.step_upper)
    t_max = min(t_ball, t_box)
    curv = g @ G @ g
    t = min(gg / -curv, t_max) if curv < 0 else t_max
    return make_feasible(problem, t * g)


def _projected_ascent(problem: TrsProblem, S, iters: int) -> np.ndarray:
    """Monotone projected-gradient ascent on a batch of feasible steps."""
    g, G, delta = problem.g, problem.G, problem.delta
    lo, hi = problem.step_lower, problem.step_upper
    eta = np.full((S.shape[0], 1), 1.0 / max(np.linalg.norm(G, 2), _TOL))
    SG = S @ G
    val = S @ g + 0.5 * (SG * S).sum(axis=1)
    stall = 0
    for _ in range(iters):
        grad = g + SG
        gnorm = np.sqrt((grad * grad).sum(axis=1))[:, None]
        # a tiny curvature would otherwise let the step jump far past the ball
        eta = np.minimum(eta, delta / np.maximum(gnorm, _TOL))
        trial = _project(lo, hi, delta, S + eta * grad)
        TG = trial @ G
        tval = trial @ g + 0.5 * (TG * trial).sum(axis=1)
        better = tval > val + 1e-15 * np.abs(val)
        gain = np.max(np.where(better, tval - val, 0.0))
        if gain <= 1e-12 * max(1.0, float(np.max(np.abs(val)))):
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0
        keep = better[:, None]
        S = np.where(keep, trial, S)
        SG = np.where(keep, TG, SG)
        val = np.where(better, tval, val)
        eta = np.where(keep, eta * 1.5, eta * 0.5)
    return S


def solve_trs(problem: TrsProblem, seed=None, n_starts: int = 32, ascent_iters: int = 30) -> np.ndarray:
    """Approximate ascent step for the ball- and box-constrained quadratic.

    ``seed`` drives the random multi-start so repeated calls are reproducible.
    """
    n = problem.g.size
    rng = np.random.default_rng(seed)
    # uniform in the ball, then mapped into the box
    z = rng.standard_normal((n_starts, n))
    z *= (problem.delta * rng.random((n_starts, 1)) ** (1.0 / n)) / np.linalg.norm(z, axis=1, keepdims=True)
    starts = np.vstack([
        np.zeros(n),
        cauchy_point(problem),
        truncated_cg(problem),
        make_feasible(problem, z),
    ])
    refined = _projected_ascent(problem, starts, ascent_iters)
    cands = np.vstack([starts[:3], refined])
    vals = problem.gain(cands)
    best = int(np.argmax(vals))
    return make_feasible(problem, cands[best])
