import math
from dataclasses import replace

import numpy as np
import pytest

import oracles
from smib.linearize import final_value
from smib.numlin import eigenvalues
from smib.params import OPERATING_POINTS
from smib.reduced_model import (
    TransferFunction,
    algebraic_currents,
    coupled_linear_model,
    electrical_torque,
    lfc_avr_transfer_functions,
    reduced_output,
    reduced_rhs,
    stator_voltages,
    swing_rate,
)


@pytest.fixture(scope="module")
def tfs(lin, rc):
    return lfc_avr_transfer_functions(lin, rc)


def test_currents_at_first_operating_point(rc):
    Id, Iq = algebraic_currents(1.1925, 1.0, rc)
    assert Id == pytest.approx(-0.9185, abs=3e-3)
    assert Iq == pytest.approx(0.4047, abs=3e-3)


def test_currents_at_third_operating_point(rc):
    Id, Iq = algebraic_currents(1.6078, 0.88676, rc)
    assert Id == pytest.approx(-1.4281, abs=5e-3)
    assert Iq == pytest.approx(0.37472, abs=5e-3)


@pytest.mark.parametrize("E, d", [(1.1925, 1.0), (0.8844, 1.0325), (1.6078, 0.88676), (0.3, 2.5)])
def test_currents_match_network_solution(rc, E, d):
    got = algebraic_currents(E, d, rc)
    want = oracles.reduced_currents(E, d)
    assert np.allclose(got, want, atol=1e-12)


def test_matched_emf_at_bus_angle_draws_no_direct_current(rc):
    lossless = replace(rc, R1=0.0, M1=rc.L3 * rc.L1)
    Id, Iq = algebraic_currents(rc.V_inf, rc.alpha, lossless)
    assert Id == 0.0
    assert Iq == 0.0


def test_tabulated_steady_state_is_nearly_stationary(rc):
    x = np.array([1.1925, 1.0, 1.0, 1.0012, 1.0012])
    assert np.max(np.abs(reduced_rhs(x, [2.529, 1.0512], rc))) <= 2e-3


def test_angle_rate_and_turbine_row(rc):
    rng = np.random.default_rng(0)
    x = rng.normal(size=5)
    x[1] = 1.0
    assert reduced_rhs(x, rng.normal(size=2), rc)[2] == 0.0
    x[3] = x[4] = 0.0
    assert reduced_rhs(x, rng.normal(size=2), rc)[3] == 0.0


@pytest.mark.parametrize("seed", range(6))
def test_rates_match_symbolic_plant(rc, seed):
    f, vt = oracles.reduced_functions()
    rng = np.random.default_rng(seed)
    x = np.array([1.2, 1.0, 1.0, 1.0, 1.0]) + 0.3 * rng.normal(size=5)
    u = np.array([2.5, 1.05]) + 0.3 * rng.normal(size=2)
    assert np.max(np.abs(reduced_rhs(x, u, rc) - f(x, u))) <= 1e-12
    assert reduced_output(x, rc)[0] == pytest.approx(vt(x), abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_expanded_torque_matches_current_form(rc, seed):
    rng = np.random.default_rng(seed)
    E, d, Tm = 1.0 + 0.5 * rng.random(), 2.0 * rng.random(), rng.random()
    x = np.array([E, 1.0, d, Tm, 0.0])
    direct = (Tm - electrical_torque(E, d, rc)) / rc.tau_j
    assert swing_rate(x, rc) == pytest.approx(direct, abs=1e-10)


@pytest.mark.parametrize("op", ["I", "II", "III"])
def test_terminal_voltage_at_operating_points(rc, op):
    o = OPERATING_POINTS[op]
    assert reduced_output(o.reduced_state(), rc)[0] == pytest.approx(o.V_t0, abs=5e-3)


def test_second_operating_point_voltage(rc):
    assert reduced_output(OPERATING_POINTS["II"].reduced_state(), rc)[0] == pytest.approx(1.0182, abs=5e-3)


def test_voltage_at_zero_flux_and_bus_angle(rc):
    x = np.array([0.0, 1.0, rc.alpha, 0.0, 0.0])
    Vd, Vq = stator_voltages(x, rc)
    assert Vd == pytest.approx(rc.Vd2, abs=1e-15)
    assert Vq == pytest.approx(rc.Vq2, abs=1e-15)
    assert reduced_output(x, rc)[0] == pytest.approx(math.hypot(rc.Vd2, rc.Vq2))


def test_speed_over_torque(tfs):
    tf = tfs["omega_over_Tm"]
    assert np.allclose(tf.num, [0.211, 0.0], atol=1e-3)
    assert np.allclose(tf.den, [1.0, 0.0, 0.3054], atol=1e-3)


def test_avr_plant(tfs):
    tf = tfs["G_avr"]
    assert np.allclose(tf.num, [0.08913], atol=1e-4)
    assert np.allclose(tf.den, [1.0, 0.5517], atol=1e-4)


def test_lfc_open_loop_structure(tfs, rc, lin):
    G = tfs["G_lfc"]
    # g55 f42 f28 s over (s - f52)(s - f41)(s^2 - f27 s - A23)
    assert np.allclose(G.num, [rc.g55 * rc.f42 * rc.f28, 0.0], atol=1e-14)
    want = np.polymul(np.polymul([1.0, -rc.f52], [1.0, -rc.f41]), [1.0, -rc.f27, -lin.A[1, 2]])
    assert np.allclose(G.den, want, atol=1e-12)
    assert tfs["H_lfc"].num[0] == pytest.approx(-rc.f51 / rc.g55)


def test_angle_steady_state_after_valve_step(tfs):
    assert final_value(tfs["delta_over_uT"]) == pytest.approx(0.6909, abs=1e-3)


def test_closed_loop_poles_match_state_space(tfs, lin):
    A, _, _ = coupled_linear_model(lin, coupled=False)
    sub = A[1:, 1:]  # omega, delta, T_m, G_V decouple from E'_q
    poles = tfs["omega_over_uT"].poles()
    assert np.max(np.abs(np.sort_complex(poles) - np.sort_complex(eigenvalues(sub)))) <= 1e-8


def test_decoupling_zeroes_cross_terms(lin):
    A, B, C = coupled_linear_model(lin, coupled=False)
    assert A[0, 2] == A[1, 0] == C[0, 2] == 0.0
    Ac, _, Cc = coupled_linear_model(lin, coupled=True)
    assert np.array_equal(Ac, lin.A) and np.array_equal(Cc, lin.C)


def test_transfer_function_normalization_and_algebra():
    G = TransferFunction([2.0, 4.0], [2.0, 6.0, 4.0])
    assert G.den == (1.0, 3.0, 2.0) and G.num == (1.0, 2.0)
    assert G(1.0) == pytest.approx(3.0 / 6.0)
    H = G * 2.0
    assert H(0.5) == pytest.approx(2 * G(0.5))
    S = G + TransferFunction.gain(1.0)
    assert S(0.3) == pytest.approx(G(0.3) + 1.0)
    cl = G.feedback(1.0)
    assert cl(0.7) == pytest.approx(G(0.7) / (1 + G(0.7)))
    assert TransferFunction([1.0, 0.0], [1.0, 1.0, 0.0]).cancel_origin().den == (1.0, 1.0)
    assert TransferFunction([1.0], [1.0, 2.0]).integrate().den == (1.0, 2.0, 0.0)
    with pytest.raises(ValueError):
        TransferFunction([1.0], [0.0])
