import math

import numpy as np
import pytest

from steerjm.assemblage import MeasurementAssemblage
from steerjm.linalg import IDENTITY2, PAULI
from steerjm.sdp import deterministic_strategies

X, Y, Z = PAULI
I2 = IDENTITY2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def unbiased(v):
    v = np.asarray(v, dtype=float)
    e = 0.5 * (I2 + v[0] * X + v[1] * Y + v[2] * Z)
    return [e, I2 - e]


def pair(eta, theta=math.pi / 2):
    """Noisy sigma_z and a noisy sharp observable at angle theta in the xz plane."""
    return MeasurementAssemblage([unbiased([0, 0, eta]),
                                  unbiased([eta * math.sin(theta), 0, eta * math.cos(theta)])])


def triple(eta=1.0):
    return MeasurementAssemblage([unbiased([eta, 0, 0]), unbiased([0, eta, 0]), unbiased([0, 0, eta])])


def cvx_robustness(m):
    """Independent IR oracle: min t with M + t N jointly measurable at total (1 + t) I."""
    cp = pytest.importorskip("cvxpy")
    d = m.dim
    strat = deterministic_strategies(m.outcomes_per_setting)
    nl = strat.response.shape[2]
    g = [cp.Variable((d, d), hermitian=True) for _ in range(nl)]
    t = cp.Variable(nonneg=True)
    cons = [gi >> 0 for gi in g]
    cons.append(sum(g) == (1 + t) * np.eye(d))
    for (x, a), op in m.items():
        rec = sum(strat.response[x, a, k] * g[k] for k in range(nl))
        cons.append(rec - op >> 0)
    prob = cp.Problem(cp.Minimize(t), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(t.value)


def cvx_is_jm(m):
    """Independent feasibility oracle on the plain definition."""
    cp = pytest.importorskip("cvxpy")
    d = m.dim
    strat = deterministic_strategies(m.outcomes_per_setting)
    nl = strat.response.shape[2]
    g = [cp.Variable((d, d), hermitian=True) for _ in range(nl)]
    cons = [gi >> 0 for gi in g]
    for (x, a), op in m.items():
        cons.append(sum(strat.response[x, a, k] * g[k] for k in range(nl)) == op)
    prob = cp.Problem(cp.Minimize(0), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.status


ACCEPTANCE_LINES = []


def report(number, ok, detail):
    """Record one acceptance verdict; all of them are printed in the terminal summary."""
    line = f"acceptance {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
