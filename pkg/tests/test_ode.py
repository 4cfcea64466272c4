import math

import numpy as np
import pytest

from smib.ode import integrate, rk4_step


def _decay(t, y):
    return -y


def _oscillator(t, y):
    return np.array([y[1], -y[0]])


def test_rk4_step_order():
    errs = []
    for h in (0.1, 0.05):
        y = np.array([1.0])
        for k in range(int(round(1.0 / h))):
            y = rk4_step(_decay, k * h, y, h)
        errs.append(abs(y[0] - math.exp(-1.0)))
    # fourth order halves the step for a 16x smaller error
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.1)


@pytest.mark.parametrize("method", ["rk4", "rk45", "lsoda"])
def test_oscillator_phase(method):
    t = np.linspace(0.0, 2 * math.pi, 9)
    res = integrate(_oscillator, [1.0, 0.0], t, method=method, dt=1e-3, rtol=1e-10, atol=1e-12)
    assert res.success
    assert np.max(np.abs(res.y[:, 0] - np.cos(t))) <= 1e-7


def test_adaptive_tracks_stiffish_decay():
    t = np.linspace(0.0, 5.0, 6)
    res = integrate(lambda t, y: -50.0 * (y - np.cos(t)), [0.0], t, rtol=1e-9, atol=1e-12)
    # slow manifold y = cos t + O(1/50)
    assert np.max(np.abs(res.y[2:, 0] - np.cos(t[2:]))) <= 0.03


def test_non_finite_stops_early():
    t = np.linspace(0.0, 2.0, 21)
    with np.errstate(over="ignore", invalid="ignore"):
        res = integrate(lambda t, y: y ** 2, [1.0], t, method="rk4", dt=1e-3)
    assert not res.success
    assert res.n_ok < len(t)
    assert "non-finite" in res.message


def test_projection_is_applied():
    t = np.linspace(0.0, 1.0, 11)
    res = integrate(lambda t, y: np.array([1.0]), [0.0], t, method="rk4", post=lambda y: np.minimum(y, 0.5))
    assert res.y[-1, 0] == 0.5


def test_grid_and_method_validation():
    with pytest.raises(ValueError):
        integrate(_decay, [1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        integrate(_decay, [1.0], [0.0, 1.0], method="euler")


def test_rhs_count_reported():
    res = integrate(_decay, [1.0], [0.0, 1.0], method="rk4", dt=0.1)
    assert res.n_rhs == 40
