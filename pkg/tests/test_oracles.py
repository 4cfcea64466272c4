import numpy as np
import pytest

import frozen
import oracles
from test_params import ORACLE_COEFFICIENTS


@pytest.fixture(scope="module")
def live():
    return oracles.frozen_values()


def test_coefficients_reproduce(live):
    for key, want in ORACLE_COEFFICIENTS.items():
        assert live["coefficients"][key] == pytest.approx(want, abs=1e-14)


@pytest.mark.parametrize("key, name", [
    ("x0", "X0"), ("u0", "U0"), ("A", "A"), ("B", "B"), ("C", "C"), ("eig", "EIG"),
    ("K_lqr", "K_LQR"), ("K_ltr", "K_LTR"), ("K_retuned", "K_RETUNED"),
    ("x0_II", "X0_II"), ("u0_II", "U0_II"), ("x0_III", "X0_III"), ("u0_III", "U0_III"),
])
def test_frozen_literals_reproduce(live, key, name):
    got = np.asarray(live[key])
    want = getattr(frozen, name)
    assert np.allclose(got, want, rtol=1e-8, atol=1e-9)
