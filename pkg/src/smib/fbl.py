"""Input-state feedback linearization of the one-axis plant and its bridge to the ninth-order plant.

Coordinates: z1 = delta, z2 = omega - 1, z3 = d(omega)/dt, z4 = T_m, z5 = d(T_m)/dt.
With E_FD = (v1 - sigma1)/gamma1 and u_T = (v2 - sigma2)/gamma2 the plant becomes two integrator chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import GainMatrix, lqr_gain
from .params import MachineParams, ReducedCoefficients
from .reduced_model import swing_rate

GAMMA_MIN = 1e-6


class SingularDecoupling(RuntimeError):
    """gamma1 vanished: the excitation channel lost relative degree."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = None if state is None else np.array(state, dtype=float)


@dataclass(frozen=True)
class FblCoefficients:
    p31: float; p32: float; p33: float; p34: float; p35: float
    p36: float; p37: float; p38: float; p39: float
    q31: float; q32: float; q33: float; q34: float; q35: float
    r31: float; r32: float; r33: float
    p51: float; p52: float; p53: float; r51: float
    e11: float; e12: float; e13: float; e14: float; e15: float
    alpha: float
    L2: float

    def __post_init__(self) -> None:
        if self.r51 == 0.0:
            raise ValueError("r51 must be nonzero")
        if self.e11 == 0.0:
            raise ValueError("e11 must be nonzero")


@dataclass(frozen=True)
class FblSetpoint:
    delta_d: float
    T_md: float

    def __post_init__(self) -> None:
        if not 0.0 < self.delta_d < math.pi:
            raise ValueError(f"delta_d={self.delta_d} outside (0, pi)")

    @property
    def z(self) -> np.ndarray:
        return np.array([self.delta_d, 0.0, 0.0, self.T_md, 0.0])


def fbl_coefficients(c: ReducedCoefficients, p: MachineParams) -> FblCoefficients:
    f11, f12, f13, g11 = c.f11, c.f12, c.f13, c.g11
    f21, f22, f23, f24, f25, f26, f27, f28 = c.f21, c.f22, c.f23, c.f24, c.f25, c.f26, c.f27, c.f28
    omega_R = 1.0  # per unit
    return FblCoefficients(
        p31=2 * f11 * f21 + f27 * f21,
        p32=2 * f21 * f12 + f22 * f11 - f23 + f27 * f22,
        p33=2 * f21 * f13 + f22 + f23 * f11 + f27 * f23,
        p34=f22 * f12 - f24 + f27 * f25,
        p35=f23 * f13 + f24 + f27 * f26,
        p36=f22 * f13 + f23 * f12 + 2 * f25 - 2 * f26 + f27 * f24,
        p37=f27 ** 2,
        p38=f27 * f28 + f28 * c.f41,
        p39=f28 * c.f42,
        q31=f23, q32=-f22, q33=f24, q34=-f24, q35=-2 * f25 + 2 * f26,
        r31=2 * f21 * g11, r32=f22 * g11, r33=f23 * g11,
        p51=c.f42 * c.f51,
        p52=c.f41 ** 2,
        p53=c.f41 * c.f42 + c.f42 * c.f52,
        r51=c.f42 * c.g55,
        e11=1.0 + c.L1 * c.L2 / c.M1,
        e12=c.L1 * c.L2 * c.V_inf / c.M1,
        e13=c.R1 * c.L2 * c.V_inf / c.M1,
        e14=omega_R * p.kM_F,
        e15=p.r_F / (omega_R * p.kM_F) if p.kM_F else math.inf,
        alpha=c.alpha,
        L2=c.L2,
    )


def fbl_transform(x, c: ReducedCoefficients) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.array([x[2], x[1] - 1.0, swing_rate(x, c), x[3], c.f41 * x[3] + c.f42 * x[4]])


def sigma1(x, k: FblCoefficients) -> float:
    E, w, d, Tm, Gv = (float(v) for v in x)
    s = math.sin(d - k.alpha)
    co = math.cos(d - k.alpha)
    return (k.p31 * E * E + k.p32 * E * co + k.p33 * E * s + k.p34 * co * co + k.p35 * s * s
            + k.p36 * s * co + k.p37 * w + k.p38 * Tm + k.p39 * Gv
            + k.q31 * E * w * co + k.q32 * E * w * s + k.q33 * w * co * co
            + k.q34 * w * s * s + k.q35 * w * s * co)


def gamma1(x, k: FblCoefficients) -> float:
    E, d = float(x[0]), float(x[2])
    return k.r31 * E + k.r32 * math.cos(d - k.alpha) + k.r33 * math.sin(d - k.alpha)


def sigma2(x, k: FblCoefficients) -> float:
    return k.p51 * float(x[1]) + k.p52 * float(x[3]) + k.p53 * float(x[4])


def brunovsky_pair() -> tuple[np.ndarray, np.ndarray]:
    A = np.zeros((5, 5))
    A[0, 1] = A[1, 2] = A[3, 4] = 1.0
    B = np.zeros((5, 2))
    B[2, 0] = B[4, 1] = 1.0
    return A, B


def brunovsky_lqr(Q, R) -> GainMatrix:
    """LQR for the two decoupled chains; cross-chain entries are exactly zero."""
    A, B = brunovsky_pair()
    g = lqr_gain(A, Q, R, B=B)
    K = g.K.copy()
    K[0, 3:] = 0.0
    K[1, :3] = 0.0
    return GainMatrix(K, "lqr-brunovsky", g.inputs)


def virtual_inputs(z, sp: FblSetpoint, K) -> np.ndarray:
    return -np.asarray(K, dtype=float) @ (np.asarray(z, dtype=float) - sp.z)


def fbl_control(x, sp: FblSetpoint, K, c: ReducedCoefficients, k: FblCoefficients) -> np.ndarray:
    """[E_FD, u_T] that imposes v = -K (z - z_d) on the transformed chains."""
    x = np.asarray(x, dtype=float)
    Kmat = K.K if isinstance(K, GainMatrix) else np.asarray(K, dtype=float)
    v = virtual_inputs(fbl_transform(x, c), sp, Kmat)
    g1 = gamma1(x, k)
    if abs(g1) <= GAMMA_MIN:
        raise SingularDecoupling(f"|gamma1| = {abs(g1):.3e} at x = {list(x)}", x)
    efd = (v[0] - sigma1(x, k)) / g1
    uT = (v[1] - sigma2(x, k)) / k.r51
    return np.array([efd, uT])


def reconstruct_eq_prime(xt, k: FblCoefficients, form: str = "field_angle") -> float:
    """E'_q from a ninth-order state: ``field_angle`` uses (I_F, delta), ``field_current`` uses (I_F, I_d)."""
    I_d, I_F, d = float(xt[0]), float(xt[1]), float(xt[6])
    if form == "field_angle":
        return (k.e14 * I_F + k.e12 * math.cos(d - k.alpha) + k.e13 * math.sin(d - k.alpha)) / k.e11
    if form == "field_current":
        return k.e14 * I_F + k.L2 * I_d
    raise ValueError(f"unknown reconstruction form {form!r}")


def truth_to_reduced(xt, k: FblCoefficients, form: str = "field_angle") -> np.ndarray:
    xt = np.asarray(xt, dtype=float)
    return np.array([reconstruct_eq_prime(xt, k, form), xt[5], xt[6], xt[7], xt[8]])


def efd_to_vf(E_FD, p: MachineParams):
    if p.kM_F == 0.0:
        raise ValueError("kM_F must be nonzero")
    omega_R = 1.0
    return (p.r_F / (omega_R * p.kM_F)) * E_FD


def vf_to_efd(V_F, p: MachineParams):
    return (p.kM_F / p.r_F) * V_F
