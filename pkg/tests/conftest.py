import math

import pytest

from mappingtorus import oracle
from mappingtorus.determinants import circle_det_massive

SEED = 20240601


@pytest.fixture(scope="session")
def oracle_calibrated():
    """The massive-circle calibration gate; oracle-based tests depend on it."""
    worst = 0.0
    for a in (1.0, 2 * math.pi):
        for t in (0.25, 1.0, 4.0):
            value = oracle.zeta_det_oracle(oracle.massive_circle_raw(a), shift=t * t)
            worst = max(worst, abs(value - circle_det_massive(a, t)))
    if worst > 1e-10:
        pytest.fail(f"oracle calibration failed: residual {worst:.3e}")
    return worst


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(SEED)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record and print one acceptance line, then assert it passed."""

    def _report(label, residual, tol, runtime=None, limit=None, extra=""):
        ok = bool(residual <= tol) and (limit is None or runtime < limit)
        line = f"{label} {'PASS' if ok else 'FAIL'} residual={residual:.3e} tol={tol:.0e}"
        if runtime is not None:
            line += f" runtime={runtime:.2f}s" + (f" limit={limit:g}s" if limit is not None else "")
        if extra:
            line += f" {extra}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert residual <= tol, line
        if limit is not None:
            assert runtime < limit, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
