from __future__ import annotations

import numpy as np
import pytest

import perturbex as px

# One line per acceptance criterion, echoed again after the test summary so
# the verdicts survive pytest's output capturing.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def criterion():
    """Record (and print) one PASS/FAIL line for an acceptance criterion."""

    def record(name: str, ok: bool, detail: str = "") -> bool:
        line = f"acceptance: {name} ... {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f" ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


@pytest.fixture(scope="session")
def logistic_anchor():
    """A small solved logistic problem reused across test modules."""
    prob = px.oracle_from_descriptor(
        {"kind": "logistic", "dim": 5, "n": 40, "reg": 0.15, "seed": 9}
    )
    sol = px.newton_minimize(prob.oracle, prob.x0)
    return prob.oracle, sol.xhat


@pytest.fixture(scope="session")
def logistic_certificate(logistic_anchor):
    f, xstar = logistic_anchor
    F = px.spd_from_dense(f.hessian(xstar))
    cert = px.estimate_certificate(
        f, xstar, curvature=F, radius=0.5, samples=200, seed=21
    )
    return f, xstar, F, cert


@pytest.fixture
def rng():
    return np.random.default_rng(0)
