import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from gramscale.data import hen_im  # noqa: E402
from gramscale.lti import RationalTF  # noqa: E402


@pytest.fixture(scope="session")
def hen():
    return {m: hen_im(m) for m in ("PM", "HIIA", "SIGMA2")}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stable_tf(rng, order, strictly_proper=True, gain_range=(0.5, 2.0)):
    """SISO with poles in [-5, -0.2] (some complex) and LHP/RHP real zeros."""
    poles = []
    while len(poles) < order:
        if order - len(poles) >= 2 and rng.random() < 0.3:
            re = -rng.uniform(0.2, 3.0)
            im = rng.uniform(0.1, 3.0)
            poles += [complex(re, im), complex(re, -im)]
        else:
            poles.append(-rng.uniform(0.2, 5.0))
    den = np.real(np.poly(poles))
    nz = int(rng.integers(0, order)) if strictly_proper else order
    zeros = rng.choice([-1.0, 1.0], size=nz) * rng.uniform(0.3, 4.0, size=nz)
    num = np.poly(zeros) if nz else np.array([1.0])
    tf = RationalTF(num, den)
    k = rng.uniform(*gain_range) / max(abs(tf.dc_gain()), 1e-3)
    return RationalTF(num * k, den)


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
