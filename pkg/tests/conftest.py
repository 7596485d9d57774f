import time

import pytest

from freebound.periodic_state import compute_periodic_state
from freebound.reaction import ReactionSpec

# acceptance verdicts, one line per criterion, echoed in the terminal summary
ACCEPTANCE: dict = {}


def record(criterion: int, title: str, ok: bool, detail: str = "") -> str:
    line = f"criterion {criterion:2d} {'PASS' if ok else 'FAIL'}  {title}"
    if detail:
        line += f"  [{detail}]"
    ACCEPTANCE[criterion] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def bench_spec():
    """Homogeneous logistic a = b = d = mu = omega = L = 1."""
    return ReactionSpec.homogeneous(1.0, 1.0, d=1.0, mu=1.0, omega=1.0, L=1.0)


@pytest.fixture(scope="session")
def bench_state(bench_spec):
    return compute_periodic_state(bench_spec, 16, 16)


@pytest.fixture(scope="session")
def bench_recursion(bench_spec, bench_state):
    """The benchmark bisection at 2 % with every step's invariant checks recorded."""
    from freebound.weinberger import estimate_c_plus

    checks = []
    t0 = time.perf_counter()
    est = estimate_c_plus(bench_spec, bench_state, bisect_tol=0.02, record_checks=True,
                          checks_out=checks)
    return {"estimate": est, "checks": checks, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def bench_direct(bench_spec, bench_state):
    from freebound.speed_lab import direct_speed

    t0 = time.perf_counter()
    est, traj = direct_speed(bench_spec, bench_state)
    return {"estimate": est, "traj": traj, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def bench_semiwave():
    from freebound.semiwave import SemiWaveProblem, shoot_semiwave_speed

    t0 = time.perf_counter()
    est = shoot_semiwave_speed(SemiWaveProblem.logistic(1.0, 1.0, 1.0, 1.0))
    return {"estimate": est, "seconds": time.perf_counter() - t0}
