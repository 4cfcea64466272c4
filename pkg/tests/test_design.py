import numpy as np
import pytest
from scipy import linalg as sla

import frozen
from smib import reference
from smib import scenarios as sc
from smib.design import (
    LtrSchedule,
    PidGains,
    UnsupportedConfiguration,
    ackermann,
    controllability_rank,
    gains_to_text,
    kalman_ltr_gain,
    lqr_gain,
    ltr_asymptote_gap,
    match_spectra,
    observability_rank,
    observer_gain,
    parse_gains,
    pid_controller,
    place_poles,
    root_locus,
    separation_matrix,
)
from smib.numlin import DesignFailure, eigenvalues
from smib.reduced_model import lfc_avr_transfer_functions


@pytest.fixture(scope="module")
def tfs(lin, rc):
    return lfc_avr_transfer_functions(lin, rc)


def _lqr(lin, weights):
    Q, R = weights
    return lqr_gain(lin, Q, R)


@pytest.mark.parametrize("weights, want", [
    (sc.LQR_LINEAR, frozen.K_LQR), (sc.LQR_LTR_REDUCED, frozen.K_LTR), (sc.LQR_RETUNED, frozen.K_RETUNED),
])
def test_lqr_against_frozen_oracle(lin, weights, want):
    g = _lqr(lin, weights)
    assert np.allclose(g.K, want, rtol=1e-7, atol=1e-6)
    assert g.inputs["care_residual"] <= 1e-6


def test_lqr_against_reference(lin):
    K = _lqr(lin, sc.LQR_LINEAR).K
    assert np.all(np.abs(K - reference.LQR_K) <= 0.02 * np.abs(reference.LQR_K) + 1e-3)


def test_lqr_closed_loop_is_stable(lin):
    g = _lqr(lin, sc.LQR_LINEAR)
    assert np.all(eigenvalues(g.closed_loop(lin.A, lin.B)).real < 0)


def test_lqr_accepts_semidefinite_state_weight(lin):
    Q = np.diag([1.0, 1.0, 1.0, 0.0, 0.0])
    g = lqr_gain(lin.A, Q, np.eye(2), B=lin.B)
    assert np.all(eigenvalues(lin.A - lin.B @ g.K).real < 0)


def test_lqr_rejects_indefinite_state_weight(lin):
    with pytest.raises(DesignFailure):
        lqr_gain(lin, -np.eye(5), np.eye(2))


def test_lqr_weight_scaling_invariance(lin):
    Q, R = sc.LQR_LINEAR
    K1 = lqr_gain(lin, Q, R).K
    K2 = lqr_gain(lin, 7.0 * Q, 7.0 * R).K
    assert np.max(np.abs(K1 - K2)) <= 1e-8 * np.abs(K1).max()


def test_gain_shape_checked(lin):
    g = _lqr(lin, sc.LQR_LINEAR)
    with pytest.raises(ValueError):
        g.closed_loop(lin.A, lin.B[:, :1])


def test_ackermann_double_integrator():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([0.0, 1.0])
    k = ackermann(A, b, [-1.0, -2.0])
    assert np.allclose(k, [2.0, 3.0], atol=1e-12)


@pytest.mark.parametrize("poles", [sc.POLES_LINEAR, sc.POLES_REDUCED, sc.POLES_TRUTH])
def test_placement_hits_spectrum(lin, poles):
    g = place_poles(lin.A, lin.B, poles)
    assert match_spectra(eigenvalues(lin.A - lin.B @ g.K), poles) <= 1e-6


def test_placement_is_deterministic(lin):
    a = place_poles(lin.A, lin.B, sc.POLES_LINEAR, seed=3).K
    b = place_poles(lin.A, lin.B, sc.POLES_LINEAR, seed=3).K
    assert np.array_equal(a, b)


def test_placement_on_open_loop_spectrum_needs_little_gain(lin):
    g = place_poles(lin.A, lin.B, eigenvalues(lin.A))
    assert np.linalg.norm(g.K) <= 1e-6


def test_placement_rejects_uncontrollable():
    A = np.diag([-1.0, -2.0])
    B = np.array([[1.0], [0.0]])
    assert controllability_rank(A, B) == 1
    with pytest.raises(DesignFailure, match="defect 1"):
        place_poles(A, B, [-3.0, -4.0])


def test_placement_rejects_overly_repeated_poles(lin):
    with pytest.raises(UnsupportedConfiguration):
        place_poles(lin.A, lin.B, [-1.0, -1.0, -1.0, -2.0, -3.0])


def test_placement_allows_pair_of_repeats(lin):
    p = [-1.0, -1.0, -2.0, -3.0, -4.0]
    g = place_poles(lin.A, lin.B, p)
    assert match_spectra(eigenvalues(lin.A - lin.B @ g.K), p) <= 1e-6


@pytest.mark.parametrize("poles", [[-1.0, -2.0], [-1.0 + 1j, -2.0, -3.0, -4.0, -5.0], [np.nan] * 5])
def test_placement_rejects_bad_lists(lin, poles):
    with pytest.raises(ValueError):
        place_poles(lin.A, lin.B, poles)


def test_observer_by_duality(lin):
    assert observability_rank(lin.A, lin.C) == 5
    obs = observer_gain(lin.A, lin.C, poles=sc.POLES_OBSERVER_PLACE)
    assert match_spectra(eigenvalues(lin.A - obs.L @ lin.C), sc.POLES_OBSERVER_PLACE) <= 1e-6
    assert obs.outputs == "Vt_omega"


def test_observer_from_scaled_controller_poles(lin):
    obs = observer_gain(lin.A, lin.C, rho=sc.OBSERVER_RHO, controller_poles=sc.POLES_LINEAR)
    want = sc.OBSERVER_RHO * np.asarray(sc.POLES_LINEAR)
    assert match_spectra(eigenvalues(lin.A - obs.L @ lin.C), want) <= 1e-6


def test_observer_needs_poles(lin):
    with pytest.raises(ValueError):
        observer_gain(lin.A, lin.C)


def test_voltage_only_observer(lin):
    C = lin.C[:1]
    poles = [-0.7, -0.8, -0.5, -0.9, -1.0]
    obs = observer_gain(lin.A, C, poles=poles)
    assert obs.outputs == "Vt"
    assert obs.L.shape == (5, 1)
    assert match_spectra(eigenvalues(lin.A - obs.L @ C), poles) <= 1e-6
    with pytest.raises(UnsupportedConfiguration):
        observer_gain(lin.A, C, poles=sc.POLES_OBSERVER_PLACE)


def test_kalman_without_recovery_matches_filter(lin):
    sched = LtrSchedule(np.eye(5), 0.65 * np.eye(2), np.eye(2), 0.0)
    H = kalman_ltr_gain(lin, sched).L
    S = sla.solve_continuous_are(lin.A.T, lin.C.T, np.eye(5), 0.65 * np.eye(2))
    assert np.allclose(H, S @ lin.C.T / 0.65, rtol=1e-7, atol=1e-9)


def test_recovery_gap_shrinks_with_q(lin):
    gaps = [ltr_asymptote_gap(lin, LtrSchedule(np.eye(5), np.eye(2), np.eye(2), q)) for q in (20.0, 50.0, 100.0)]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("sched", [sc.LTR_REDUCED, sc.LTR_TRUTH])
def test_tuned_filters_are_stable(lin, sched):
    H = kalman_ltr_gain(lin, LtrSchedule(**sched)).L
    assert np.all(eigenvalues(lin.A - H @ lin.C).real < 0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        LtrSchedule(np.eye(5), -np.eye(2), np.eye(2), 1.0)
    with pytest.raises(ValueError):
        LtrSchedule(np.eye(5), np.eye(2), np.eye(2), -1.0)


def test_separation_spectrum(lin):
    K = _lqr(lin, sc.LQR_LINEAR).K
    L = observer_gain(lin.A, lin.C, poles=sc.POLES_OBSERVER_PLACE).L
    M = separation_matrix(lin.A, lin.B, lin.C, K, L)
    want = np.concatenate([eigenvalues(lin.A - lin.B @ K), eigenvalues(lin.A - L @ lin.C)])
    assert match_spectra(eigenvalues(M), want) <= 1e-6


def test_avr_loop_gain(tfs):
    Kp, Ki, Kd = sc.PID_LINEAR["AVR"]
    L = pid_controller(PidGains(Kp, Ki, Kd, "AVR")).tf * tfs["G_avr"]
    assert np.allclose(L.num, [0.3565, 0.8913, 0.8913], atol=2e-3)
    assert np.allclose(L.den, [1.0, 0.5517, 0.0], atol=2e-3)


def test_lfc_loop_gain_numerator(tfs):
    Kp, Ki, Kd = sc.PID_LINEAR["LFC"]
    L = pid_controller(PidGains(Kp, Ki, Kd, "LFC")).tf * tfs["G_lfc"]
    assert np.allclose(L.num, [211.0, 422.0, 316.5, 0.0], rtol=2e-3, atol=1e-9)


def test_proportional_only_is_static():
    c = pid_controller(PidGains(3.0, 0.0, 0.0))
    assert c.tf.num == (3.0,) and c.tf.den == (1.0,)


def test_filtered_realization_approaches_ideal():
    c = pid_controller(PidGains(2.0, 3.0, 0.5), N=1e4)
    s = 0.7j
    realized = c.C @ np.linalg.solve(s * np.eye(2) - c.A, c.B) + c.D
    assert abs(realized - c.tf(s)) <= 1e-3 * abs(c.tf(s))


def test_pid_validation():
    with pytest.raises(ValueError):
        PidGains(np.inf, 0.0, 0.0)
    with pytest.raises(ValueError):
        PidGains(1.0, 0.0, 0.0, loop="XYZ")


def test_root_locus_starts_at_open_loop_poles(tfs):
    G = tfs["G_lfc"]
    r = root_locus(G, [1e-9])
    assert match_spectra(r[0], G.poles()) <= 1e-6


def test_uncompensated_lfc_loop_goes_unstable(tfs):
    r = root_locus(tfs["G_lfc"], np.logspace(-1, 3, 41))
    assert r[0].real.max() < 0
    assert r[-1].real.max() > 0


def test_pid_compensated_lfc_loop_stays_stable(tfs):
    Kp, Ki, Kd = sc.PID_LINEAR["LFC"]
    L = (pid_controller(PidGains(Kp, Ki, Kd)).tf * tfs["G_lfc"]).cancel_origin()
    r = root_locus(L, np.logspace(-1, 1, 21))
    assert r.real.max() < 0


def test_root_locus_validation(tfs):
    with pytest.raises(ValueError):
        root_locus(tfs["G_lfc"], [2.0, 1.0])
    with pytest.raises(ValueError):
        root_locus(tfs["G_lfc"], [0.0, 1.0])


def test_gain_text_round_trip(lin):
    K = _lqr(lin, sc.LQR_LINEAR).K
    back = parse_gains(gains_to_text({"K": K, "L": np.ones((5, 2))}, {"scenario": "x"}))
    assert np.array_equal(back["K"], K)
    assert back["L"].shape == (5, 2)
