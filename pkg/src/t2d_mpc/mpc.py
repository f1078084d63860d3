"""Receding-horizon controller for the equivalent exercise input.

At each period boundary ``kT`` the controller picks one scalar ``u_eq`` in
``[0, u_eq_max]`` that minimises

    integral over [kT, (k+N)T] of  G(s)^2 + lambda * u_eq^2  ds

with ``u_eq`` held over the whole prediction window, then applies it for one
period. The scalar problem is solved by a coarse grid scan followed by golden
section refinement around the best grid point.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .integrator import (
    DEFAULT_STEP,
    NEGATIVE_TOL,
    IntegrationError,
    InputSchedule,
    TimeGrid,
    _g2_integral,
    _OK,
    integrate,
)
from .model import ModelParams, StateVector

__all__ = [
    "ControllerConfig",
    "ControlDecision",
    "AllCandidatesDiverged",
    "horizon_cost",
    "solve_period",
    "run_closed_loop",
    "golden_section",
]

log = logging.getLogger(__name__)

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class AllCandidatesDiverged(ArithmeticError):
    pass


@dataclass(frozen=True)
class ControllerConfig:
    N: int = 20
    T: float = 2.0
    lam: float = 60.0
    u_eq_max: float = 3.0
    grid_points: int = 61
    tol: float = 1e-4
    h: float = DEFAULT_STEP

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        if not self.T > 0:
            raise ValueError(f"T must be > 0, got {self.T}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.u_eq_max >= 0:
            raise ValueError(f"u_eq_max must be >= 0, got {self.u_eq_max}")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not self.h > 0:
            raise ValueError("h must be > 0")

    @property
    def horizon(self) -> float:
        return self.N * self.T


@dataclass
class ControlDecision:
    k: int
    t_apply: float
    u_eq_star: float
    cost_star: float
    cost_curve: tuple = field(default=((), ()), repr=False)  # (grid inputs, costs)


def _horizon_times(cfg: ControllerConfig) -> np.ndarray:
    return TimeGrid(0.0, cfg.horizon, cfg.h).times()


def _cost(xa, u, t, pa, lam, horizon):
    g2, status, _, _ = _g2_integral(xa, float(u), t, pa, NEGATIVE_TOL)
    if status != _OK:
        return math.inf
    return g2 + lam * u * u * horizon


def horizon_cost(x_k, u_eq: float, cfg: ControllerConfig, p: ModelParams) -> float:
    """Predicted cost of holding ``u_eq`` for ``N*T`` days from ``x_k``.

    A candidate whose prediction leaves the admissible state set costs
    ``math.inf``.
    """
    if not 0 <= u_eq <= cfg.u_eq_max:
        raise ValueError(f"u_eq={u_eq} outside [0, {cfg.u_eq_max}]")
    xa = np.asarray(x_k, dtype=np.float64)
    c = _cost(xa, u_eq, _horizon_times(cfg), p.as_array(), cfg.lam, cfg.horizon)
    if math.isinf(c):
        log.debug("candidate u_eq=%g diverged from state %s", u_eq, tuple(x_k))
    return c


def golden_section(f, a: float, b: float, tol: float, fa=None, fb=None):
    """Minimise ``f`` on ``[a, b]`` until the bracket is at most ``tol`` wide.

    Returns ``(x, fx)`` for the best point evaluated, endpoints included when
    their values are supplied. Ties go to the smaller x.
    """
    best = []
    if fa is not None:
        best.append((fa, a))
    if fb is not None:
        best.append((fb, b))
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    best += [(fc, c), (fd, d)]
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
            best.append((fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
            best.append((fd, d))
    fx, x = min(best)
    return x, fx


def solve_period(x_k, cfg: ControllerConfig, p: ModelParams, k: int = 0, t_apply: float = 0.0) -> ControlDecision:
    """Optimal constant input for the prediction window starting at ``x_k``."""
    xa = np.asarray(x_k, dtype=np.float64)
    if cfg.u_eq_max == 0:
        c0 = _cost(xa, 0.0, _horizon_times(cfg), p.as_array(), cfg.lam, cfg.horizon)
        if math.isinf(c0):
            raise AllCandidatesDiverged(f"period {k}: the only admissible input diverges")
        return ControlDecision(k, t_apply, 0.0, c0, ((0.0,), (c0,)))

    t = _horizon_times(cfg)
    pa = p.as_array()
    grid = np.linspace(0.0, cfg.u_eq_max, cfg.grid_points)
    costs = np.array([_cost(xa, u, t, pa, cfg.lam, cfg.horizon) for u in grid])
    if np.all(np.isinf(costs)):
        raise AllCandidatesDiverged(f"period {k}: every candidate input diverged from {tuple(x_k)}")
    n_bad = int(np.isinf(costs).sum())
    if n_bad:
        log.warning("period %d: %d of %d grid candidates diverged", k, n_bad, grid.size)

    i = int(np.argmin(costs))  # first minimum, i.e. smallest u on ties
    lo, hi = max(i - 1, 0), min(i + 1, grid.size - 1)

    def f(u):
        return _cost(xa, u, t, pa, cfg.lam, cfg.horizon)

    u_star, c_star = golden_section(f, grid[lo], grid[hi], cfg.tol, costs[lo], costs[hi])
    if costs[i] <= c_star:
        u_star, c_star = grid[i], costs[i]
    return ControlDecision(k, t_apply, float(u_star), float(c_star),
                           (tuple(grid.tolist()), tuple(costs.tolist())))


def run_closed_loop(x0, cfg: ControllerConfig, p: ModelParams, duration: float):
    """Simulate the receding-horizon loop for ``duration`` days.

    A final partial period is simulated when ``duration`` is not a multiple
    of ``T``. Returns ``(trajectory, decisions)``.
    """
    if not duration >= cfg.T:
        raise ValueError(f"duration {duration} d is shorter than one control period ({cfg.T} d)")
    n_periods = math.ceil(duration / cfg.T - 1e-9)
    x = StateVector(*(float(v) for v in x0))
    traj = None
    decisions = []
    for k in range(n_periods):
        t_start = k * cfg.T
        t_end = min((k + 1) * cfg.T, duration)
        try:
            dec = solve_period(x, cfg, p, k=k, t_apply=t_start)
        except AllCandidatesDiverged as exc:
            raise AllCandidatesDiverged(f"at t={t_start} d: {exc}") from exc
        decisions.append(dec)
        try:
            seg = integrate(x, InputSchedule.constant(dec.u_eq_star, t_start),
                            TimeGrid(t_start, t_end, cfg.h), p)
        except IntegrationError as exc:
            raise type(exc)(f"period {k}: {exc}", t=exc.t, state=exc.state) from exc
        traj = seg if traj is None else traj.concat(seg)
        x = seg.final_state
    return traj, decisions
