import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lcmatch import Study  # noqa: E402

ACCEPTANCE_LINES = []


def make_study(treated, controls, outcome=None, **kw):
    """Study from treated and control covariate rows (treated listed first)."""
    xt = np.atleast_2d(np.asarray(treated, dtype=float))
    xc = np.atleast_2d(np.asarray(controls, dtype=float))
    if xt.shape[0] == 1 and np.ndim(treated) == 1:
        xt = xt.T
    if xc.shape[0] == 1 and np.ndim(controls) == 1:
        xc = xc.T
    x = np.vstack([xt, xc])
    z = np.r_[np.ones(len(xt)), np.zeros(len(xc))]
    return Study(x, z, outcome, **kw)


def random_study(rng, n_treated, n_controls, p=3, shift=0.3, outcome=False):
    xt = rng.standard_normal((n_treated, p)) + shift
    xc = rng.standard_normal((n_controls, p))
    y = rng.integers(0, 2, n_treated + n_controls).astype(float) if outcome else None
    return make_study(xt, xc, y)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
