import numpy as np
import pytest

from t2d_mpc import REFERENCE_STATE, ControllerConfig, TimeGrid, default_params, integrate, run_closed_loop

YEAR = 365.0


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def reference_cfg():
    return ControllerConfig(N=20, T=2.0, lam=60.0, u_eq_max=3.0)


@pytest.fixture(scope="session")
def open_loop_year(params):
    return integrate(REFERENCE_STATE, 0.0, TimeGrid(0.0, YEAR), params)


@pytest.fixture(scope="session")
def closed_loop_year(params, reference_cfg):
    return run_closed_loop(REFERENCE_STATE, reference_cfg, params, YEAR)


def trapezoid(y, t):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


# --- acceptance reporting: one line per criterion in the terminal summary ---

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA.append((marker.args[0], "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in _CRITERIA:
        terminalreporter.write_line(f"{status}  {label}" + (f"  [{detail}]" if detail else ""))
