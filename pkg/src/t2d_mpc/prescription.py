"""Conversion between the equivalent input and concrete exercise sessions.

A program of sessions at intensity ``u_bar`` (percent) lasting ``delta``
minutes, repeated every ``T`` days, has period-averaged input

    u_eq = u_bar * delta / T          (delta and T in the same unit)

and the inverse map gives the session duration for a requested ``u_eq``.
Displayed durations are multiplied by a calibration constant (1 by default;
the shipped parameter file sets it so that u_eq = 3 at 60 % every 2 days is
400 min/week).
"""

from __future__ import annotations

from dataclasses import dataclass

MINUTES_PER_DAY = 1440.0
WHO_MINIMUM_MIN_PER_WEEK = 150.0

__all__ = [
    "ExerciseProgram",
    "WeeklyDose",
    "InfeasibleDuration",
    "UnitMismatch",
    "equivalent_input",
    "inverse_map",
    "weekly_dose",
    "MINUTES_PER_DAY",
    "WHO_MINIMUM_MIN_PER_WEEK",
]


class UnitMismatch(TypeError):
    pass


class InfeasibleDuration(ValueError):
    """Requested session is longer than its period.

    ``delta`` is the requested duration and ``clamped`` the longest feasible
    one (the whole period), both in minutes.
    """

    def __init__(self, message, delta: float, clamped: float):
        super().__init__(message)
        self.delta = delta
        self.clamped = clamped


@dataclass(frozen=True)
class ExerciseProgram:
    u_bar: float  # intensity, percent
    T: float  # days between session starts
    delta: float  # session duration, minutes

    def __post_init__(self):
        if not 0 < self.u_bar <= 100:
            raise ValueError(f"u_bar must be in (0, 100], got {self.u_bar}")
        if not self.T > 0:
            raise ValueError(f"T must be > 0 days, got {self.T}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be >= 0 minutes, got {self.delta}")
        if self.delta > self.period_minutes:
            raise ValueError(f"session of {self.delta} min does not fit in a {self.T} d period")

    @property
    def period_minutes(self) -> float:
        return self.T * MINUTES_PER_DAY


@dataclass(frozen=True)
class WeeklyDose:
    minutes_per_week: float

    def __post_init__(self):
        if not self.minutes_per_week >= 0:
            raise ValueError("weekly dose must be >= 0")

    @property
    def meets_who_minimum(self) -> bool:
        return self.minutes_per_week >= WHO_MINIMUM_MIN_PER_WEEK


def equivalent_input(program: ExerciseProgram, calibration: float = 1.0) -> float:
    """Period-averaged input of ``program``."""
    if not isinstance(program, ExerciseProgram):
        raise UnitMismatch(
            "equivalent_input needs an ExerciseProgram (minutes and days); "
            f"got {type(program).__name__}"
        )
    return program.u_bar * program.delta / (calibration * program.period_minutes)


def inverse_map(u_eq: float, u_bar: float, T: float, calibration: float = 1.0) -> float:
    """Session duration in minutes delivering ``u_eq`` at intensity ``u_bar`` every ``T`` days.

    Raises InfeasibleDuration when the session would not fit in its period.
    """
    if not u_bar > 0:
        raise ValueError(f"u_bar must be > 0, got {u_bar}")
    if not T > 0:
        raise ValueError(f"T must be > 0, got {T}")
    if not u_eq >= 0:
        raise ValueError(f"u_eq must be >= 0, got {u_eq}")
    period = T * MINUTES_PER_DAY
    delta = calibration * u_eq * period / u_bar
    if delta > period:
        raise InfeasibleDuration(
            f"u_eq={u_eq} at {u_bar}% needs {delta:.1f} min per {period:.0f} min period",
            delta=delta, clamped=period,
        )
    return delta


def weekly_dose(program: ExerciseProgram) -> WeeklyDose:
    return WeeklyDose(program.delta * 7.0 / program.T)
