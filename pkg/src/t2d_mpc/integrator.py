"""Fixed-step RK4 integration under piecewise-constant input.

The time grid is uniform with step ``h`` from ``t0`` and is augmented with
every input breakpoint, so the input never switches inside a step. States
that leave the physiological set raise instead of being clamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import ModelParams, StateVector, _rhs

__all__ = [
    "DEFAULT_STEP",
    "NEGATIVE_TOL",
    "IntegrationError",
    "NonFiniteState",
    "NegativeState",
    "TimeGrid",
    "InputSchedule",
    "Trajectory",
    "step",
    "integrate",
]

# RK4 is unstable for k*h > ~2.78; insulin clearance k = 432/d caps h near 0.0064 d.
DEFAULT_STEP = 0.005
NEGATIVE_TOL = 1e-9
MAX_STEPS = 10**9

_OK, _NONFINITE, _NEGATIVE = 0, 1, 2


class IntegrationError(ArithmeticError):
    """A trajectory left the admissible state set at time ``t``."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class NonFiniteState(IntegrationError):
    pass


class NegativeState(IntegrationError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    h: float = DEFAULT_STEP

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"step h must be > 0, got {self.h}")
        if not self.t1 > self.t0:
            raise ValueError(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        if (self.t1 - self.t0) / self.h >= MAX_STEPS:
            raise ValueError("time grid exceeds 1e9 steps")

    def times(self, breakpoints=()) -> np.ndarray:
        """Sample times: t0 + i*h up to t1, plus t1 and any interior breakpoints.

        Uniform points closer than 1e-9*h to a breakpoint or to t1 are replaced
        by it, so each breakpoint appears exactly once.
        """
        t0, t1, h = float(self.t0), float(self.t1), float(self.h)
        eps = 1e-9 * h
        n = int(np.floor((t1 - t0) / h + 1e-9))
        base = t0 + h * np.arange(n + 1)
        extra = [float(b) for b in breakpoints if t0 + eps < b < t1 - eps]
        extra.append(t1)
        if not extra:
            return base
        extra = np.unique(np.asarray(extra))
        keep = np.ones(base.size, dtype=bool)
        for b in extra:
            keep &= np.abs(base - b) > eps
        keep[0] = True
        t = np.concatenate([base[keep], extra])
        t.sort()
        return t


@dataclass(frozen=True)
class InputSchedule:
    """Piecewise-constant input: ``values[i]`` holds on ``[starts[i], starts[i+1])``.

    The last value holds until the end of whatever grid it is used on.
    """

    starts: tuple
    values: tuple

    def __post_init__(self):
        if len(self.starts) == 0 or len(self.starts) != len(self.values):
            raise ValueError("starts and values must be non-empty and equal length")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("schedule start times must be strictly increasing")
        if any(not np.isfinite(v) or v < 0 for v in self.values):
            raise ValueError("inputs must be finite and >= 0")

    @classmethod
    def constant(cls, u: float, t0: float = 0.0) -> "InputSchedule":
        return cls((float(t0),), (float(u),))

    @property
    def breakpoints(self) -> tuple:
        return self.starts[1:]

    def value_at(self, t) -> np.ndarray:
        """Input in force at each time in ``t`` (right-continuous)."""
        idx = np.searchsorted(np.asarray(self.starts), np.asarray(t, dtype=float), side="right") - 1
        if np.any(idx < 0):
            raise ValueError(f"schedule starts at {self.starts[0]}, before some requested time")
        return np.asarray(self.values, dtype=float)[idx]


@dataclass
class Trajectory:
    """Sampled solution; ``u[i]`` is the input applied on ``[t[i], t[i+1])``."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray

    def __len__(self):
        return self.t.size

    @property
    def G(self) -> np.ndarray:
        return self.x[:, 0]

    def state(self, i: int) -> StateVector:
        return StateVector.from_array(self.x[i])

    @property
    def final_state(self) -> StateVector:
        return self.state(-1)

    def samples(self):
        for i in range(self.t.size):
            yield float(self.t[i]), self.state(i), float(self.u[i])

    def concat(self, other: "Trajectory") -> "Trajectory":
        """Append ``other``, which must start where this one ends."""
        if self.t.size and other.t.size and other.t[0] != self.t[-1]:
            raise ValueError("trajectories are not contiguous")
        # the shared boundary sample takes the input of the later segment
        return Trajectory(
            t=np.concatenate([self.t[:-1], other.t]),
            x=np.concatenate([self.x[:-1], other.x]),
            u=np.concatenate([self.u[:-1], other.u]),
        )


# ---------------------------------------------------------------------------
# compiled kernels

@njit(cache=True)
def _rk4(x, u, h, p):
    G, I, b, S, V = x[0], x[1], x[2], x[3], x[4]
    k1 = _rhs(G, I, b, S, V, u, p)
    hh = 0.5 * h
    k2 = _rhs(G + hh * k1[0], I + hh * k1[1], b + hh * k1[2], S + hh * k1[3], V + hh * k1[4], u, p)
    k3 = _rhs(G + hh * k2[0], I + hh * k2[1], b + hh * k2[2], S + hh * k2[3], V + hh * k2[4], u, p)
    k4 = _rhs(G + h * k3[0], I + h * k3[1], b + h * k3[2], S + h * k3[3], V + h * k3[4], u, p)
    out = np.empty(5)
    h6 = h / 6.0
    for j in range(5):
        out[j] = x[j] + h6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    return out


@njit(cache=True)
def _check(x, tol):
    for j in range(5):
        if not np.isfinite(x[j]):
            return _NONFINITE
    if x[0] <= 0.0:
        return _NEGATIVE
    for j in range(1, 5):
        if x[j] < -tol:
            return _NEGATIVE
    return _OK


@njit(cache=True)
def _integrate_times(x0, t, u, p, tol):
    """RK4 over sample times ``t`` with ``u[i]`` held on step i.

    Returns (states, status, index of the first bad sample or -1).
    """
    n = t.size
    xs = np.empty((n, 5))
    xs[0] = x0
    for i in range(n - 1):
        xs[i + 1] = _rk4(xs[i], u[i], t[i + 1] - t[i], p)
        status = _check(xs[i + 1], tol)
        if status != _OK:
            return xs[: i + 2], status, i + 1
    return xs, _OK, -1


@njit(cache=True)
def _g2_integral(x0, u, t, p, tol):
    """Trapezoid integral of G^2 along an RK4 run at constant ``u``, without storing states."""
    x = x0.copy()
    g_prev = x[0] * x[0]
    acc = 0.0
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        x = _rk4(x, u, h, p)
        status = _check(x, tol)
        if status != _OK:
            return np.inf, status, i + 1, x
        g = x[0] * x[0]
        acc += 0.5 * h * (g_prev + g)
        g_prev = g
    return acc, _OK, -1, x


def _raise_for(status, t, state):
    if status == _NONFINITE:
        raise NonFiniteState(f"non-finite state at t={t:.6g} d: {state}", t=t, state=state)
    raise NegativeState(f"state left the physiological set at t={t:.6g} d: {state}", t=t, state=state)


# ---------------------------------------------------------------------------
# public API

def step(x, u_eq: float, h: float, p: ModelParams) -> StateVector:
    """One classical RK4 step of size ``h`` days."""
    if not h > 0:
        raise ValueError(f"step h must be > 0, got {h}")
    xa = np.asarray(x, dtype=np.float64)
    out = _rk4(xa, float(u_eq), float(h), p.as_array())
    status = _check(out, NEGATIVE_TOL)
    if status != _OK:
        _raise_for(status, float(h), StateVector.from_array(out))
    return StateVector.from_array(out)


def integrate(x0, schedule: InputSchedule | float, grid: TimeGrid, p: ModelParams) -> Trajectory:
    """Integrate from ``grid.t0`` to ``grid.t1`` under a piecewise-constant input.

    ``schedule`` may be a bare number for a constant input. Faults raise
    :class:`NonFiniteState` or :class:`NegativeState` carrying the time of the
    first offending sample.
    """
    if not isinstance(schedule, InputSchedule):
        schedule = InputSchedule.constant(float(schedule), grid.t0)
    x0 = StateVector(*(float(v) for v in x0))
    if not x0.is_physiological(NEGATIVE_TOL):
        raise ValueError(f"initial state is not physiological: {x0}")
    t = grid.times(schedule.breakpoints)
    u = schedule.value_at(t)
    xs, status, bad = _integrate_times(x0.as_array(), t, u, p.as_array(), NEGATIVE_TOL)
    if status != _OK:
        _raise_for(status, float(t[bad]), StateVector.from_array(xs[bad]))
    return Trajectory(t=t, x=xs, u=u)
