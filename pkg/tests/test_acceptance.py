"""Exit criteria for the reference scenario, one test per criterion.

Run ``pytest tests/test_acceptance.py`` to get a PASS/FAIL line per criterion
in the terminal summary.
"""

import numpy as np
import pytest

from t2d_mpc import (
    REFERENCE_STATE,
    ControllerConfig,
    ExerciseProgram,
    StateVector,
    TimeGrid,
    equivalent_input,
    horizon_cost,
    integrate,
    inverse_map,
    psi1,
    psi2,
    solve_period,
    vector_field,
    weekly_dose,
)
from t2d_mpc.model import load_calibration
from t2d_mpc.scenario import load_config, run_scenario

from conftest import YEAR, trapezoid

U_BAR, T_PROGRAM = 50.0, 2.0


@pytest.mark.criterion("C1 open-loop progression to G~600, G>150 first in day 80-130")
def test_c1_open_loop_progression(open_loop_year, record_property):
    traj = open_loop_year
    g_end = traj.G[-1]
    t_cross = traj.t[np.argmax(traj.G > 150.0)]
    record_property("G_365", round(float(g_end), 2))
    record_property("first_G>150_day", round(float(t_cross), 2))
    assert 570.0 <= g_end <= 630.0
    assert np.any(traj.G > 150.0) and 80.0 <= t_cross <= 130.0


@pytest.mark.criterion("C2 closed-loop MPC (N=20, lambda=60, u_max=3, T=2) ends in [90, 110]")
def test_c2_closed_loop_reversal(closed_loop_year, record_property):
    traj, decisions = closed_loop_year
    record_property("G_365", round(float(traj.G[-1]), 2))
    record_property("decisions", len(decisions))
    assert traj.t[-1] == YEAR
    assert 90.0 <= traj.G[-1] <= 110.0


@pytest.mark.criterion("C3 early weekly dose in [240, 360] min/week, session duration non-increasing to day 100")
def test_c3_early_dose(closed_loop_year, record_property):
    _, decisions = closed_loop_year
    cal = load_calibration()
    deltas = np.array([inverse_map(d.u_eq_star, U_BAR, T_PROGRAM, cal) for d in decisions])
    weekly = np.array([weekly_dose(ExerciseProgram(U_BAR, T_PROGRAM, d)).minutes_per_week for d in deltas])
    t = np.array([d.t_apply for d in decisions])
    early = weekly[:10]
    record_property("weekly_first10", f"{early.min():.1f}..{early.max():.1f}")
    record_property("max_delta_increase_first100d", f"{np.diff(deltas[t < 100.0]).max():.3g}")
    assert np.all((early >= 240.0) & (early <= 360.0))
    assert np.all(np.diff(deltas[t < 100.0]) <= 0.0)


@pytest.mark.criterion("C4 calibration anchor u_eq=3 at 60% every 2 d in [360, 440] min/week")
def test_c4_calibration_anchor(record_property):
    cal = load_calibration()
    delta = inverse_map(3.0, 60.0, 2.0, cal)
    dose = weekly_dose(ExerciseProgram(60.0, 2.0, delta)).minutes_per_week
    record_property("calibration", cal)
    record_property("weekly", round(dose, 3))
    assert 360.0 <= dose <= 440.0


@pytest.mark.criterion("C5 RK4 order (error ratio in [12, 20]) and V_l closed form to rel 1e-6 at h=1e-3")
def test_c5_integrator_order(params, record_property):
    def vl_exact(t, u, p):
        return p.SR * u / (p.K_IL6 * p.k_s) * (1.0 - np.exp(-p.k_s * t))

    def max_err(p, h):
        tr = integrate(REFERENCE_STATE, 1.0, TimeGrid(0.0, 1.0, h), p)
        return np.max(np.abs(tr.x[:, 4] - vl_exact(tr.t, 1.0, p)))

    # k_s raised so the truncation error dominates round-off at stable step sizes
    fast = params.replace(k_s=10.0)
    ratio = max_err(fast, 0.005) / max_err(fast, 0.0025)
    tr = integrate(REFERENCE_STATE, 1.0, TimeGrid(0.0, 10.0, 1e-3), params)
    rel = np.max(np.abs(tr.x[1:, 4] / vl_exact(tr.t[1:], 1.0, params) - 1.0))
    record_property("ratio", round(float(ratio), 3))
    record_property("max_rel_err", f"{rel:.2e}")
    assert 12.0 <= ratio <= 20.0
    assert rel <= 1e-6


def _random_states(p, n, seed=2024):
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(n):
        G = rng.uniform(80.0, 350.0)
        beta = rng.uniform(20.0, 3000.0)
        I = beta * p.sigma * G**2 / (p.alpha + G**2) / p.k * rng.uniform(0.5, 1.5)
        states.append(StateVector(G, I, beta, rng.uniform(0.02, 0.72), rng.uniform(0.0, 30.0)))
    return states


@pytest.mark.criterion("C6 solver within 2 cells of 1001-point grid argmin on 20 random states; ties to smaller u")
def test_c6_optimizer_oracle(params, reference_cfg, record_property):
    cell = reference_cfg.u_eq_max / 1000
    dense = np.linspace(0.0, reference_cfg.u_eq_max, 1001)
    worst = 0.0
    for x in _random_states(params, 20):
        u_star = solve_period(x, reference_cfg, params).u_eq_star
        costs = np.array([horizon_cost(x, u, reference_cfg, params) for u in dense])
        u_dense = dense[int(np.argmin(costs))]
        worst = max(worst, abs(u_star - u_dense) / cell)
    # exercise with no effect and no penalty: every input costs the same
    inert = params.replace(zeta_si=0.0, zeta_p=0.0, zeta_a=0.0)
    tie = solve_period(StateVector(180.0, 30.0, 500.0, 0.3, 0.0), ControllerConfig(lam=0.0), inert)
    record_property("worst_cells", round(worst, 3))
    record_property("tie_u", tie.u_eq_star)
    assert worst <= 2.0
    assert tie.u_eq_star == 0.0


@pytest.mark.criterion("C7 properties: psi bounds, V_l slope, round trip, closed-loop cost < open-loop, reruns identical")
def test_c7_property_suite(params, open_loop_year, closed_loop_year, tmp_path, record_property):
    v = np.concatenate([[0.0], np.logspace(-3, 5, 400)])
    p1, p2 = psi1(v, params), psi2(v, params)
    assert np.all((p1 >= 1.0) & (p1 <= 1.0 + params.zeta_p))
    assert np.all((p2 >= 1.0 - params.zeta_a) & (p2 <= 1.0))
    assert p1[0] * p2[0] == 1.0

    x = StateVector(150.0, 25.0, 500.0, 0.4, 5.0)
    us = np.array([0.0, 1.0, 2.5])
    dv = np.array([vector_field(x, u, params).V_l for u in us])
    np.testing.assert_allclose(np.diff(dv) / np.diff(us), params.SR / params.K_IL6, rtol=1e-12)

    rng = np.random.default_rng(7)
    cal = load_calibration()
    worst_rt = 0.0
    for u_eq in rng.uniform(0.0, U_BAR / cal, 200):
        d = inverse_map(u_eq, U_BAR, T_PROGRAM, cal)
        back = equivalent_input(ExerciseProgram(U_BAR, T_PROGRAM, d), cal)
        worst_rt = max(worst_rt, abs(back - u_eq) / max(u_eq, 1e-300))
    assert worst_rt <= 1e-12

    ol, (cl, _) = open_loop_year, closed_loop_year
    j_open, j_closed = trapezoid(ol.G**2, ol.t), trapezoid(cl.G**2, cl.t)
    assert j_closed < j_open

    cfg_file = tmp_path / "rerun.ini"
    cfg_file.write_text("[scenario]\nmode = mpc\nduration = 6\noutput = a\n[controller]\nN = 20\n")
    a = load_config(cfg_file)
    b = a.__class__(**{**a.__dict__, "output_dir": tmp_path / "b"})
    run_scenario(a, figures=False)
    run_scenario(b, figures=False)
    for name in ("trajectory.csv", "decisions.csv", "report.json"):
        assert (a.output_dir / name).read_bytes() == (b.output_dir / name).read_bytes()

    record_property("int_G2_open", f"{j_open:.4g}")
    record_property("int_G2_closed", f"{j_closed:.4g}")
    record_property("round_trip_rel", f"{worst_rt:.1e}")
