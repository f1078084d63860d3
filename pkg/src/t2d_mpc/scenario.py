"""Scenario configuration, execution and output files.

A scenario file is INI-style::

    [scenario]
    mode = mpc              # or open-loop
    duration = 365          # days
    h = 0.005               # RK4 step, days
    params = default        # or a path relative to this file
    output = out            # directory, relative to this file

    [initial_state]
    G = 100
    I = 10
    beta = 300
    S_I = 0.72
    V_l = 0

    [controller]            # required in mpc mode
    N = 20
    T = 2
    lambda = 60
    u_eq_max = 3
    grid_points = 61
    tolerance = 1e-4

    [program]               # prescription display
    u_bar = 50
    T = 2

Outputs in the output directory: ``trajectory.csv``, ``decisions.csv``,
``report.json`` and, unless disabled, ``glucose.png`` and
``session_duration.png``.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .integrator import DEFAULT_STEP, TimeGrid, Trajectory, integrate
from .model import (
    DEFAULT_PARAMS_PATH,
    REFERENCE_STATE,
    ModelParams,
    StateVector,
    load_calibration,
    load_params,
)
from .mpc import ControllerConfig, run_closed_loop
from .prescription import InfeasibleDuration, WHO_MINIMUM_MIN_PER_WEEK, inverse_map

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "RunReport",
    "load_config",
    "run_scenario",
    "emit_outputs",
    "trajectory_csv",
    "decisions_csv",
    "decision_rows",
    "TRAJECTORY_COLUMNS",
    "DECISION_COLUMNS",
]

log = logging.getLogger(__name__)

MODES = ("open-loop", "mpc")
TRAJECTORY_COLUMNS = ("t_days", "G", "I", "beta", "S_I", "V_l", "u_eq_applied")
DECISION_COLUMNS = ("k", "t_days", "u_eq_star", "cost_star", "delta_min", "weekly_dose_min")

_SECTION_KEYS = {
    "scenario": {"mode", "duration", "h", "params", "output"},
    "initial_state": set(StateVector._fields),
    "controller": {"N", "T", "lambda", "u_eq_max", "grid_points", "tolerance"},
    "program": {"u_bar", "T"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    initial_state: StateVector
    duration: float
    params_path: Path
    controller: ControllerConfig | None
    u_bar: float
    program_T: float
    output_dir: Path
    h: float = DEFAULT_STEP
    source: Path | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode: expected one of {MODES}, got {self.mode!r}")
        if not self.duration > 0:
            raise ConfigError(f"duration: must be > 0, got {self.duration}")
        if not self.h > 0:
            raise ConfigError(f"h: must be > 0, got {self.h}")
        if self.mode == "mpc" and self.controller is None:
            raise ConfigError("controller: section required in mpc mode")
        if not 0 < self.u_bar <= 100:
            raise ConfigError(f"program.u_bar: must be in (0, 100], got {self.u_bar}")
        if not self.program_T > 0:
            raise ConfigError(f"program.T: must be > 0, got {self.program_T}")
        if not self.initial_state.is_physiological():
            raise ConfigError(f"initial_state: not physiological: {self.initial_state}")
        if not Path(self.params_path).is_file():
            raise ConfigError(f"params: file not found: {self.params_path}")

    def with_mode(self, mode: str) -> "ScenarioConfig":
        controller = self.controller
        if mode == "mpc" and controller is None:
            raise ConfigError("controller: section required in mpc mode")
        return replace(self, mode=mode, controller=controller)


@dataclass
class RunReport:
    summary: dict
    provenance: dict
    decisions: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"summary": self.summary, "provenance": self.provenance, "decisions": self.decisions},
            indent=2, sort_keys=True,
        ) + "\n"


# ---------------------------------------------------------------------------
# config loading

def _number(section, key, cast=float, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"{section.name}.{key}: missing")
        return default
    raw = section[key]
    try:
        value = cast(raw)
    except ValueError:
        raise ConfigError(f"{section.name}.{key}: not a valid {cast.__name__}: {raw!r}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{section.name}.{key}: must be finite")
    return value


def _integer(raw):
    f = float(raw)
    if f != int(f):
        raise ValueError(raw)
    return int(f)


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario file; every default is filled in."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        # configparser messages carry the offending line number
        raise ConfigError(f"parse error: {exc}") from exc

    unknown = [s for s in cp.sections() if s not in _SECTION_KEYS]
    if unknown:
        raise ConfigError(f"unknown sections {unknown}")
    for name in cp.sections():
        extra = sorted(set(cp[name].keys()) - _SECTION_KEYS[name])
        if extra:
            raise ConfigError(f"{name}: unknown keys {extra}")
    if not cp.has_section("scenario"):
        raise ConfigError("scenario: section missing")

    base = path.parent
    sc = cp["scenario"]
    mode = sc.get("mode", "open-loop").strip()
    duration = _number(sc, "duration", default=365.0)
    h = _number(sc, "h", default=DEFAULT_STEP)
    params_raw = sc.get("params", "default").strip()
    params_path = Path(str(DEFAULT_PARAMS_PATH)) if params_raw == "default" else (base / params_raw)
    output_dir = base / sc.get("output", "out").strip()

    if cp.has_section("initial_state"):
        st = cp["initial_state"]
        x0 = StateVector(*(_number(st, f, default=getattr(REFERENCE_STATE, f))
                           for f in StateVector._fields))
    else:
        x0 = REFERENCE_STATE

    controller = None
    if cp.has_section("controller"):
        cs = cp["controller"]
        try:
            controller = ControllerConfig(
                N=_number(cs, "N", _integer, default=20),
                T=_number(cs, "T", default=2.0),
                lam=_number(cs, "lambda", default=60.0),
                u_eq_max=_number(cs, "u_eq_max", default=3.0),
                grid_points=_number(cs, "grid_points", _integer, default=61),
                tol=_number(cs, "tolerance", default=1e-4),
                h=h if h > 0 else DEFAULT_STEP,
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"controller: {exc}") from exc

    pg = cp["program"] if cp.has_section("program") else {}
    default_T = controller.T if controller is not None else 2.0
    if pg:
        u_bar = _number(pg, "u_bar", default=50.0)
        program_T = _number(pg, "T", default=default_T)
    else:
        u_bar, program_T = 50.0, default_T

    cfg = ScenarioConfig(
        mode=mode, initial_state=x0, duration=duration, params_path=params_path,
        controller=controller, u_bar=u_bar, program_T=program_T,
        output_dir=output_dir, h=h, source=path,
    )
    if mode == "mpc" and duration < controller.T:
        raise ConfigError(f"duration: {duration} d is shorter than one control period ({controller.T} d)")
    return cfg


# ---------------------------------------------------------------------------
# running

def _open_loop(cfg: ScenarioConfig, p: ModelParams) -> Trajectory:
    return integrate(cfg.initial_state, 0.0, TimeGrid(0.0, cfg.duration, cfg.h), p)


def decision_rows(decisions, u_bar: float, T: float, calibration: float):
    """Decision table rows plus the indices of periods whose session had to be clamped."""
    rows, clamped = [], []
    for d in decisions:
        try:
            delta = inverse_map(d.u_eq_star, u_bar, T, calibration)
        except InfeasibleDuration as exc:
            log.warning("period %d: %s; reporting the clamped %.1f min", d.k, exc, exc.clamped)
            delta = exc.clamped
            clamped.append(d.k)
        rows.append((d.k, d.t_apply, d.u_eq_star, d.cost_star, delta, delta * 7.0 / T))
    return rows, clamped


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def trajectory_csv(traj: Trajectory) -> str:
    rows = ((traj.t[i], *traj.x[i], traj.u[i]) for i in range(len(traj)))
    return _csv_text(TRAJECTORY_COLUMNS, rows)


def decisions_csv(rows) -> str:
    return _csv_text(DECISION_COLUMNS, rows)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _build_report(cfg, traj, rows, clamped) -> RunReport:
    G = traj.G
    summary = {
        "mode": cfg.mode,
        "duration_days": cfg.duration,
        "n_samples": len(traj),
        "final_G": float(G[-1]),
        "min_G": float(G.min()),
        "max_G": float(G.max()),
        "n_periods": len(rows),
        "total_prescribed_minutes": float(sum(r[4] for r in rows)),
        "intensity_percent": cfg.u_bar,
        "session_period_days": cfg.program_T,
        "who_minimum_min_per_week": WHO_MINIMUM_MIN_PER_WEEK,
        "periods_meeting_who_minimum": sum(1 for r in rows if r[5] >= WHO_MINIMUM_MIN_PER_WEEK),
        "clamped_periods": clamped,
    }
    cfg_bytes = Path(cfg.source).read_bytes() if cfg.source else repr(cfg).encode()
    provenance = {
        "config_sha256": _sha256(cfg_bytes),
        "params_sha256": _sha256(Path(cfg.params_path).read_bytes()),
        "version": __version__,
    }
    decisions = [dict(zip(DECISION_COLUMNS, r)) for r in rows]
    return RunReport(summary, provenance, decisions)


def run_scenario(cfg: ScenarioConfig, write: bool = True, figures: bool = True):
    """Run one scenario; returns ``(trajectory, decisions, report)``.

    With ``write`` the outputs land in ``cfg.output_dir`` (all or nothing).
    """
    p = load_params(cfg.params_path)
    calibration = load_calibration(cfg.params_path)
    baseline = None
    if cfg.mode == "open-loop":
        traj, decisions = _open_loop(cfg, p), []
    else:
        if cfg.duration < cfg.controller.T:
            raise ConfigError(f"duration: {cfg.duration} d is shorter than one control period")
        traj, decisions = run_closed_loop(cfg.initial_state, cfg.controller, p, cfg.duration)
        if figures and write:
            baseline = _open_loop(cfg, p)
    rows, clamped = decision_rows(decisions, cfg.u_bar, cfg.program_T, calibration)
    report = _build_report(cfg, traj, rows, clamped)
    if write:
        emit_outputs(traj, rows, report, cfg, baseline=baseline, figures=figures)
    return traj, decisions, report


# ---------------------------------------------------------------------------
# output

def emit_outputs(traj: Trajectory, rows, report: RunReport, cfg: ScenarioConfig,
                 baseline: Trajectory | None = None, figures: bool = True) -> dict:
    """Write CSVs, report and figures; nothing becomes visible unless all succeed."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    payloads = {
        "trajectory.csv": trajectory_csv(traj).encode(),
        "decisions.csv": decisions_csv(rows).encode(),
        "report.json": report.to_json().encode(),
    }
    if figures:
        from .plotting import glucose_figure, session_duration_figure, figure_bytes

        closed = traj if cfg.mode == "mpc" else None
        open_ = baseline if cfg.mode == "mpc" else traj
        payloads["glucose.png"] = figure_bytes(glucose_figure(open_, closed))
        if rows:
            payloads["session_duration.png"] = figure_bytes(
                session_duration_figure(rows, cfg.u_bar, cfg.program_T))

    staged = {}
    try:
        for name, data in payloads.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            staged[name] = tmp
        for name, tmp in staged.items():
            os.replace(tmp, out / name)
    except BaseException:
        for tmp in staged.values():
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise
    return {name: out / name for name in payloads}
