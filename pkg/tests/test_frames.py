import math

import numpy as np
import pytest

from smib.frames import blocked_inductance, park_block, park_matrix, rotation_generator

THETAS = np.linspace(-math.pi, math.pi, 25)


def test_d_row_at_zero_angle():
    P = park_matrix(0.0)
    assert np.allclose(P[1], math.sqrt(2.0 / 3.0) * np.array([1.0, -0.5, -0.5]), atol=1e-15)


@pytest.mark.parametrize("theta", THETAS)
def test_orthogonal(theta):
    P = park_matrix(theta)
    assert np.max(np.abs(P @ P.T - np.eye(3))) <= 1e-12
    assert np.max(np.abs(np.linalg.inv(P) - P.T)) <= 1e-12


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.7, -2.4])
def test_balanced_set_has_no_zero_sequence(theta):
    i_abc = np.cos([theta, theta - 2 * math.pi / 3, theta + 2 * math.pi / 3])
    i0dq = park_matrix(theta) @ i_abc
    assert abs(i0dq[0]) <= 1e-15
    # a balanced unit set aligned with the rotor is pure d axis
    assert i0dq[1] == pytest.approx(math.sqrt(1.5))
    assert abs(i0dq[2]) <= 1e-15


def test_power_invariance():
    rng = np.random.default_rng(7)
    for theta in rng.uniform(-math.pi, math.pi, 20):
        v, i = rng.normal(size=3), rng.normal(size=3)
        P = park_matrix(theta)
        assert abs(v @ i - (P @ v) @ (P @ i)) <= 1e-12


def test_round_rotor_degeneracy(params):
    m = blocked_inductance(params, L_s=1.0, M_s=0.3, L_m=0.0)
    assert m.Ld == m.Lq == pytest.approx(1.3)
    assert m.L0 == pytest.approx(0.4)


def test_default_split_reproduces_axis_inductances(params):
    m = blocked_inductance(params)
    assert m.Ld == pytest.approx(params.L_d, abs=1e-12)
    assert m.Lq == pytest.approx(params.L_q, abs=1e-12)
    assert m.L_s > 2 * m.M_s


@pytest.mark.parametrize("theta", [0.0, 0.7, 2.1])
def test_rotating_frame_similarity(params, theta):
    m = blocked_inductance(params)
    B = park_block(theta)
    assert np.max(np.abs(B @ m.static(theta) @ B.T - m.L_B)) <= 1e-10


@pytest.mark.parametrize("theta", THETAS[::4])
def test_static_matrix_symmetric(params, theta):
    L = blocked_inductance(params).static(theta)
    assert np.array_equal(L, L.T)


def test_rotating_matrix_symmetric_and_sparse(params):
    m = blocked_inductance(params)
    assert np.array_equal(m.L_B, m.L_B.T)
    # zero-sequence row decouples entirely
    assert np.count_nonzero(m.L_B[0]) == 1
    assert m.L_B[1, 3] == pytest.approx(params.kM_F)


@pytest.mark.parametrize("theta", THETAS[::3])
def test_stator_block_eigenvalues_are_angle_free(params, theta):
    m = blocked_inductance(params)
    ev = np.sort(np.linalg.eigvalsh(m.static(theta)[:3, :3]))
    assert np.allclose(ev, np.sort([m.L0, m.Ld, m.Lq]), atol=1e-8)


@pytest.mark.parametrize("theta", [0.0, 0.4, 2.9])
def test_rotation_generator(theta):
    want = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    assert np.max(np.abs(rotation_generator(theta) - want)) <= 1e-10
