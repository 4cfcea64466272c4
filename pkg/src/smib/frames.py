"""Park (0dq) transformation and the machine inductance matrices in both frames."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import MachineParams

_SHIFT = 2.0 * math.pi / 3.0


def park_matrix(theta: float) -> np.ndarray:
    """Power-invariant Park matrix mapping (a, b, c) to (0, d, q)."""
    s2 = 1.0 / math.sqrt(2.0)
    angles = (theta, theta - _SHIFT, theta + _SHIFT)
    return math.sqrt(2.0 / 3.0) * np.array([
        [s2, s2, s2],
        [math.cos(a) for a in angles],
        [math.sin(a) for a in angles],
    ])


def park_block(theta: float) -> np.ndarray:
    """6x6 transform B = diag(P, I) acting on stator and rotor quantities together."""
    B = np.eye(6)
    B[:3, :3] = park_matrix(theta)
    return B


@dataclass(frozen=True)
class InductanceMatrices:
    L_s: float
    M_s: float
    L_m: float
    M_F: float
    M_D: float
    M_Q: float
    L_F: float
    L_D: float
    L_Q: float
    M_R: float
    L_B: np.ndarray
    L0: float
    Ld: float
    Lq: float

    def static(self, theta: float) -> np.ndarray:
        """L(theta) in the stationary abc frame, stacked with the rotor windings."""
        Ls, Ms, Lm = self.L_s, self.M_s, self.L_m
        c2 = lambda a: math.cos(2.0 * a)  # noqa: E731
        Lab = -Ms - Lm * c2(theta + math.pi / 6)
        Lbc = -Ms - Lm * c2(theta - math.pi / 2)
        Lca = -Ms - Lm * c2(theta + 5 * math.pi / 6)
        L11 = np.array([
            [Ls + Lm * c2(theta), Lab, Lca],
            [Lab, Ls + Lm * c2(theta - _SHIFT), Lbc],
            [Lca, Lbc, Ls + Lm * c2(theta + _SHIFT)],
        ])
        angles = (theta, theta - _SHIFT, theta + _SHIFT)
        L12 = np.array([[self.M_F * math.cos(a), self.M_D * math.cos(a), self.M_Q * math.sin(a)]
                        for a in angles])
        L22 = np.array([[self.L_F, self.M_R, 0.0], [self.M_R, self.L_D, 0.0], [0.0, 0.0, self.L_Q]])
        return np.block([[L11, L12], [L12.T, L22]])


def blocked_inductance(p: MachineParams, L_s: float | None = None, M_s: float | None = None,
                       L_m: float | None = None) -> InductanceMatrices:
    """Rotating-frame inductance L_B and the static L(theta) it comes from.

    Without explicit ``L_s, M_s, L_m`` the stator terms are chosen so the d and q
    inductances equal ``p.L_d`` and ``p.L_q`` with a zero-sequence inductance of
    ``0.1 * L_q``.
    """
    if L_m is None:
        L_m = (p.L_d - p.L_q) / 3.0
    if L_s is None or M_s is None:
        # Ld + Lq = 2(Ls + Ms); L0 = Ls - 2Ms
        sum_s = 0.5 * (p.L_d + p.L_q)
        L0_target = 0.1 * p.L_q
        M_s = (sum_s - L0_target) / 3.0 if M_s is None else M_s
        L_s = sum_s - M_s if L_s is None else L_s
    k = p.k
    M_F, M_D, M_Q = p.kM_F / k, p.kM_D / k, p.kM_Q / k
    L0 = L_s - 2.0 * M_s
    Ld = L_s + M_s + 1.5 * L_m
    Lq = L_s + M_s - 1.5 * L_m
    L_B = np.array([
        [L0, 0, 0, 0, 0, 0],
        [0, Ld, 0, k * M_F, k * M_D, 0],
        [0, 0, Lq, 0, 0, k * M_Q],
        [0, k * M_F, 0, p.L_F, p.M_R, 0],
        [0, k * M_D, 0, p.M_R, p.L_D, 0],
        [0, 0, k * M_Q, 0, 0, p.L_Q],
    ], dtype=float)
    return InductanceMatrices(L_s, M_s, L_m, M_F, M_D, M_Q, p.L_F, p.L_D, p.L_Q, p.M_R,
                              L_B, L0, Ld, Lq)


def _park_central_difference(theta: float, h: float) -> np.ndarray:
    """P(theta + h) - P(theta - h) via sum-to-product identities, free of cancellation."""
    angles = (theta, theta - _SHIFT, theta + _SHIFT)
    sh = math.sin(h)
    return math.sqrt(2.0 / 3.0) * np.array([
        [0.0, 0.0, 0.0],
        [-2.0 * math.sin(a) * sh for a in angles],
        [2.0 * math.cos(a) * sh for a in angles],
    ])


def rotation_generator(theta: float, h: float = 1e-6) -> np.ndarray:
    """P * dP^-1/dtheta by central differences of step ``h``."""
    dPinv = _park_central_difference(theta, h).T / (2.0 * h)
    return park_matrix(theta) @ dPinv
