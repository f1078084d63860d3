"""Type-2 diabetes progression model with an exercise-dose MPC."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    REFERENCE_STATE,
    ModelParams,
    StateVector,
    apoptosis_base,
    default_params,
    load_calibration,
    load_params,
    proliferation_base,
    psi1,
    psi2,
    vector_field,
)
from .integrator import InputSchedule, TimeGrid, Trajectory, integrate, step  # noqa: E402
from .mpc import ControlDecision, ControllerConfig, horizon_cost, run_closed_loop, solve_period  # noqa: E402
from .prescription import ExerciseProgram, equivalent_input, inverse_map, weekly_dose  # noqa: E402
