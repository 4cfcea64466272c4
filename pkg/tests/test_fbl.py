import math
from dataclasses import replace

import numpy as np
import pytest

import oracles
from smib import scenarios as sc
from smib.fbl import (
    FblSetpoint,
    SingularDecoupling,
    brunovsky_lqr,
    brunovsky_pair,
    efd_to_vf,
    fbl_coefficients,
    fbl_control,
    fbl_transform,
    gamma1,
    reconstruct_eq_prime,
    sigma1,
    sigma2,
    truth_to_reduced,
    vf_to_efd,
)
from smib.numlin import eigenvalues
from smib.reduced_model import reduced_rhs
from smib.sim import Fbl, SimOptions, reduced_plant, simulate


@pytest.fixture(scope="module")
def kf(rc, params):
    return fbl_coefficients(rc, params)


@pytest.fixture(scope="module")
def K():
    return brunovsky_lqr(*sc.FBL_REDUCED).K


def _setpoint(eq):
    return FblSetpoint(eq.x0[2], eq.x0[3])


def test_transform_at_equilibrium(eq1, rc):
    z = fbl_transform(eq1.x0, rc)
    assert np.allclose(z, [1.0, 0.0, 0.0, 1.0012, 0.0], atol=1e-10)


def test_third_coordinate_is_speed_rate(rc):
    rng = np.random.default_rng(4)
    for _ in range(5):
        x = np.array([1.2, 1.0, 1.0, 1.0, 1.0]) + 0.2 * rng.normal(size=5)
        assert fbl_transform(x, rc)[2] == pytest.approx(reduced_rhs(x, [0.0, 0.0], rc)[1], abs=1e-15)
        assert fbl_transform(x, rc)[4] == pytest.approx(reduced_rhs(x, [0.0, 0.0], rc)[3], abs=1e-15)


@pytest.mark.parametrize("seed", range(6))
def test_excitation_split_matches_symbolic_derivative(kf, seed):
    rng = np.random.default_rng(seed)
    x = np.array([1.2, 1.0, 1.0, 1.0, 1.0]) + 0.2 * rng.normal(size=5)
    s_want, g_want = oracles.excitation_split(x)
    assert sigma1(x, kf) == pytest.approx(s_want, abs=1e-12)
    assert gamma1(x, kf) == pytest.approx(g_want, abs=1e-12)


def test_turbine_split_matches_chain_rule(rc, kf):
    rng = np.random.default_rng(9)
    x = rng.normal(size=5)
    u = rng.normal(size=2)
    f = reduced_rhs(x, u, rc)
    dz5 = rc.f41 * f[3] + rc.f42 * f[4]
    assert sigma2(x, kf) + kf.r51 * u[1] == pytest.approx(dz5, abs=1e-12)
    assert kf.r51 == rc.f42 * rc.g55


@pytest.mark.xfail(strict=True, reason="control at the computed equilibrium is 2.5318, outside 2.529 +/- 2e-3; see ledger")
def test_control_at_equilibrium_matches_tabulated(eq1, rc, kf, K):
    assert fbl_control(eq1.x0, _setpoint(eq1), K, rc, kf)[0] == pytest.approx(2.529, abs=2e-3)


def test_control_at_equilibrium_holds_it(eq1, rc, kf, K):
    u = fbl_control(eq1.x0, _setpoint(eq1), K, rc, kf)
    assert np.allclose(u, eq1.u0, atol=1e-8)


def test_brunovsky_gain_is_block_diagonal(K):
    assert K.shape == (2, 5)
    assert np.all(K[0, 3:] == 0.0)
    assert np.all(K[1, :3] == 0.0)
    A, B = brunovsky_pair()
    assert np.all(eigenvalues(A - B @ K).real < 0)


def test_singular_decoupling_raises(eq1, rc, kf, K):
    x = eq1.x0.copy()
    # choose E' so that gamma1 vanishes at this angle
    d = x[2] - kf.alpha
    x[0] = -(kf.r32 * math.cos(d) + kf.r33 * math.sin(d)) / kf.r31
    with pytest.raises(SingularDecoupling) as info:
        fbl_control(x, _setpoint(eq1), K, rc, kf)
    assert np.array_equal(info.value.state, x)


def test_setpoint_angle_checked():
    with pytest.raises(ValueError):
        FblSetpoint(math.pi, 1.0)


@pytest.mark.parametrize("form", ["field_angle", "field_current"])
def test_reconstruction_at_first_operating_point(teq1, kf, form):
    assert reconstruct_eq_prime(teq1.x0, kf, form) == pytest.approx(1.1925, abs=5e-3)


def test_reconstruction_forms_agree(teq1, kf):
    a = reconstruct_eq_prime(teq1.x0, kf, "field_angle")
    b = reconstruct_eq_prime(teq1.x0, kf, "field_current")
    assert a == pytest.approx(b, abs=5e-3)


def test_reconstruction_without_field_current(kf):
    xt = np.zeros(9)
    xt[6] = kf.alpha
    assert reconstruct_eq_prime(xt, kf) == pytest.approx(kf.e12 / kf.e11, abs=1e-15)
    with pytest.raises(ValueError):
        reconstruct_eq_prime(xt, kf, "bogus")


def test_truth_to_reduced_keeps_mechanical_states(teq1, kf):
    x = truth_to_reduced(teq1.x0, kf)
    assert np.array_equal(x[1:], teq1.x0[5:])


def test_field_voltage_conversion(params):
    assert efd_to_vf(2.529, params) == pytest.approx(0.00121, abs=2e-5)
    assert efd_to_vf(0.0, params) == 0.0
    assert efd_to_vf(2.0, params) == pytest.approx(2 * efd_to_vf(1.0, params))
    assert vf_to_efd(efd_to_vf(1.7, params), params) == pytest.approx(1.7)
    with pytest.raises(ValueError):
        efd_to_vf(1.0, replace(params, kM_F=0.0))


def test_closed_loop_returns_to_equilibrium(eq1, rc, kf, K):
    x0 = eq1.x0 + np.array([0.0, 0.0, 0.0, 0.05, 0.0])
    tr = simulate(reduced_plant(rc), Fbl(_setpoint(eq1), K, rc, kf), x0, 20.0, SimOptions(sample_dt=0.1))
    assert tr.complete
    assert np.max(np.abs(tr.x[-1] - eq1.x0)) <= 1e-3
