"""Exercise-modified Topp model of type-2 diabetes progression.

Five states, all rates per day:

    G    plasma glucose, mg/dl
    I    serum insulin, uU/ml
    beta beta-cell mass, mg
    S_I  insulin sensitivity, ml/uU/d
    V_l  integrated long-term exercise effect, (pg/dl)*min

The exercise input ``u_eq`` feeds ``V_l``, which in turn boosts beta-cell
proliferation, suppresses apoptosis and slows the decline of ``S_I``.

The scalar kernels are compiled with numba so the integrator and the MPC
cost can call them in tight loops; the public wrappers below accept a
:class:`ModelParams` and also work elementwise on numpy arrays.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numba import njit

__all__ = [
    "StateVector",
    "ModelParams",
    "ParameterFileError",
    "DEFAULT_PARAMS_PATH",
    "load_params",
    "load_calibration",
    "default_params",
    "proliferation_base",
    "apoptosis_base",
    "psi1",
    "psi2",
    "vector_field",
]


class StateVector(NamedTuple):
    G: float
    I: float
    beta: float
    S_I: float
    V_l: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "StateVector":
        return cls(*(float(v) for v in a))

    def is_physiological(self, tol: float = 1e-9) -> bool:
        """True if all fields are finite, G > 0 and the rest are >= -tol."""
        if not all(math.isfinite(v) for v in self):
            return False
        return self.G > 0 and min(self.I, self.beta, self.S_I, self.V_l) >= -tol


# Reference initial state (onset of the predisposing conditions).
REFERENCE_STATE = StateVector(G=100.0, I=10.0, beta=300.0, S_I=0.72, V_l=0.0)


@dataclass(frozen=True)
class ModelParams:
    R0: float
    Eg0: float
    sigma: float
    alpha: float
    k: float
    d0: float
    r1r: float
    r2r: float
    r1a: float
    r2a: float
    c: float
    S_I_target: float
    zeta_si: float
    k_n_si: float
    SR: float
    K_IL6: float
    k_s: float
    zeta_p: float
    k_p: float
    zeta_a: float
    k_a: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{f.name} must be a finite number, got {v!r}")
        positive = ("R0", "Eg0", "sigma", "alpha", "k", "d0", "c", "k_n_si",
                    "SR", "K_IL6", "k_s", "k_p", "k_a")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("r1r", "r2r", "r1a", "r2a", "S_I_target", "zeta_p", "zeta_si"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.zeta_a < 1:
            raise ValueError("zeta_a must lie in [0, 1)")
        if not self.zeta_si < 1:
            raise ValueError("zeta_si must be < 1")

    def as_array(self) -> np.ndarray:
        """Parameters in declaration order, the layout the compiled kernels expect."""
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=np.float64)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


PARAM_NAMES = tuple(f.name for f in fields(ModelParams))
DEFAULT_PARAMS_PATH = resources.files("t2d_mpc") / "data" / "default_params.ini"


class ParameterFileError(ValueError):
    pass


def _read_ini(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (R0, K_IL6, ...)
    text = path.read_text() if hasattr(path, "read_text") else Path(path).read_text()
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ParameterFileError(str(exc)) from exc
    return cp


def load_params(path=None) -> ModelParams:
    """Read the ``[model]`` section of a parameter file.

    Missing or unknown keys are rejected, as are non-decimal values.
    """
    path = DEFAULT_PARAMS_PATH if path is None else path
    cp = _read_ini(path)
    if not cp.has_section("model"):
        raise ParameterFileError(f"{path}: missing [model] section")
    section = cp["model"]
    keys = set(section.keys())
    missing = [n for n in PARAM_NAMES if n not in keys]
    extra = sorted(keys - set(PARAM_NAMES))
    if missing:
        raise ParameterFileError(f"{path}: missing keys {missing}")
    if extra:
        raise ParameterFileError(f"{path}: unknown keys {extra}")
    values = {}
    for name in PARAM_NAMES:
        raw = section[name]
        try:
            values[name] = float(raw)
        except ValueError:
            raise ParameterFileError(f"{path}: {name} = {raw!r} is not a number") from None
    try:
        return ModelParams(**values)
    except ValueError as exc:
        raise ParameterFileError(f"{path}: {exc}") from exc


def load_calibration(path=None) -> float:
    """Duration calibration constant from the ``[prescription]`` section (1.0 if absent)."""
    path = DEFAULT_PARAMS_PATH if path is None else path
    cp = _read_ini(path)
    if not cp.has_section("prescription"):
        return 1.0
    extra = sorted(set(cp["prescription"].keys()) - {"calibration"})
    if extra:
        raise ParameterFileError(f"{path}: unknown keys {extra} in [prescription]")
    raw = cp["prescription"].get("calibration", "1.0")
    try:
        value = float(raw)
    except ValueError:
        raise ParameterFileError(f"{path}: calibration = {raw!r} is not a number") from None
    if not value > 0:
        raise ParameterFileError(f"{path}: calibration must be > 0")
    return value


def default_params() -> ModelParams:
    return load_params(DEFAULT_PARAMS_PATH)


# ---------------------------------------------------------------------------
# compiled kernels

@njit(cache=True)
def _prolif(G, r1r, r2r):
    return r1r * G - r2r * G * G


@njit(cache=True)
def _apopt(G, d0, r1a, r2a):
    return d0 - r1a * G + r2a * G * G


@njit(cache=True)
def _hill2(V, half):
    V2 = V * V
    return V2 / (half * half + V2)


@njit(cache=True)
def _rhs(G, I, b, S, V, u, p):
    # p layout follows ModelParams field order
    R0, Eg0, sigma, alpha, k = p[0], p[1], p[2], p[3], p[4]
    d0, r1r, r2r, r1a, r2a = p[5], p[6], p[7], p[8], p[9]
    c, S_target, zeta_si, k_n_si = p[10], p[11], p[12], p[13]
    SR, K_IL6, k_s = p[14], p[15], p[16]
    zeta_p, k_p, zeta_a, k_a = p[17], p[18], p[19], p[20]

    G2 = G * G
    dG = R0 - (Eg0 + S * I) * G
    dI = b * sigma * G2 / (alpha + G2) - k * I
    P_bar = _prolif(G, r1r, r2r) * (1.0 + zeta_p * _hill2(V, k_p))
    A_bar = _apopt(G, d0, r1a, r2a) * (1.0 - zeta_a * _hill2(V, k_a))
    db = (P_bar - A_bar) * b
    dS = -c * (S - S_target) * (1.0 - zeta_si * V / (k_n_si + V))
    dV = SR / K_IL6 * u - k_s * V
    return dG, dI, db, dS, dV


# ---------------------------------------------------------------------------
# public wrappers

def proliferation_base(G, p: ModelParams):
    """Beta-cell proliferation rate without exercise, 1/d."""
    return _prolif(G, p.r1r, p.r2r)


def apoptosis_base(G, p: ModelParams):
    """Beta-cell apoptosis rate without exercise, 1/d."""
    return _apopt(G, p.d0, p.r1a, p.r2a)


def psi1(V_l, p: ModelParams):
    """Proliferation boost factor, in [1, 1 + zeta_p)."""
    return 1.0 + p.zeta_p * _hill2(V_l, p.k_p)


def psi2(V_l, p: ModelParams):
    """Apoptosis suppression factor, in (1 - zeta_a, 1]."""
    return 1.0 - p.zeta_a * _hill2(V_l, p.k_a)


def vector_field(x, u_eq: float, p: ModelParams) -> StateVector:
    """Time derivative of the state under a constant input ``u_eq``.

    Defined for any real state; keeping trajectories physiological is left to
    the integrator. Raises FloatingPointError if a component overflows.
    """
    G, I, b, S, V = (float(v) for v in x)
    dx = StateVector(*_rhs(G, I, b, S, V, float(u_eq), p.as_array()))
    if not all(math.isfinite(v) for v in dx):
        raise FloatingPointError(f"non-finite derivative {dx} at state {tuple(x)}")
    return dx
