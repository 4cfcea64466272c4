"""Fifth-order one-axis plant, its algebraic stator relations, and SISO transfer functions.

State ``[E_q_prime, omega, delta, T_m, G_V]``, input ``[E_FD, u_T]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .numlin import polynomial_roots
from .params import ReducedCoefficients

STATE_LABELS = ("E_q_prime", "omega", "delta", "T_m", "G_V")
INPUT_LABELS = ("E_FD", "u_T")
OUTPUT_LABELS = ("V_t", "omega")


def _bus(delta: float, c: ReducedCoefficients) -> tuple[float, float]:
    """Infinite-bus voltage in the rotor frame (V_inf_d, V_inf_q)."""
    return -c.V_inf * math.sin(delta - c.alpha), c.V_inf * math.cos(delta - c.alpha)


def algebraic_currents(E_q_prime: float, delta: float, c: ReducedCoefficients) -> tuple[float, float]:
    Vd_inf, Vq_inf = _bus(delta, c)
    dE = E_q_prime - Vq_inf
    I_d = (-dE * c.L1 - Vd_inf * c.R1) / c.M1
    I_q = (dE * c.R1 - Vd_inf * c.L3) / c.M1
    return I_d, I_q


def electrical_torque(E_q_prime: float, delta: float, c: ReducedCoefficients) -> float:
    """Air-gap torque from the stator currents (unexpanded form)."""
    I_d, I_q = algebraic_currents(E_q_prime, delta, c)
    return E_q_prime * I_q - c.L4 * I_d * I_q


def swing_rate(x, c: ReducedCoefficients) -> float:
    """The omega row of the reduced plant, using the expanded torque coefficients."""
    E, w, d, Tm = float(x[0]), float(x[1]), float(x[2]), float(x[3])
    s = math.sin(d - c.alpha)
    co = math.cos(d - c.alpha)
    return (c.f21 * E * E + c.f22 * E * co + c.f23 * E * s + c.f24 * s * co
            + c.f25 * co * co + c.f26 * s * s + c.f27 * w + c.f28 * Tm)


def reduced_rhs(x, u, c: ReducedCoefficients) -> np.ndarray:
    E, w, d, Tm, Gv = (float(v) for v in x)
    EFD, uT = float(u[0]), float(u[1])
    s = math.sin(d - c.alpha)
    co = math.cos(d - c.alpha)
    out = np.array([
        c.f11 * E + c.f12 * co + c.f13 * s + c.g11 * EFD,
        swing_rate(x, c),
        w - 1.0,
        c.f41 * Tm + c.f42 * Gv,
        c.f51 * w + c.f52 * Gv + c.g55 * uT,
    ])
    if not np.all(np.isfinite(out)):
        warnings.warn(f"non-finite reduced rates at x={list(x)}, u={list(u)}", RuntimeWarning, stacklevel=2)
    return out


def stator_voltages(x, c: ReducedCoefficients) -> tuple[float, float]:
    E, d = float(x[0]), float(x[2])
    s = math.sin(d - c.alpha)
    co = math.cos(d - c.alpha)
    Vd = c.Vd1 * E + c.Vd2 * co + c.Vd3 * s
    Vq = c.Vq1 * E + c.Vq2 * co + c.Vq3 * s + E
    return Vd, Vq


def reduced_output(x, c: ReducedCoefficients) -> np.ndarray:
    Vd, Vq = stator_voltages(x, c)
    return np.array([math.hypot(Vd, Vq), float(x[1])])


# ---------------------------------------------------------------- transfer functions

def _trim(p) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    nz = np.flatnonzero(np.abs(p) > 0)
    return p[nz[0]:] if nz.size else np.array([0.0])


@dataclass(frozen=True)
class TransferFunction:
    """SISO rational function, coefficients in descending powers of s, monic denominator."""

    num: tuple
    den: tuple

    def __init__(self, num, den):
        n = _trim(num)
        d = _trim(den)
        if d[0] == 0:
            raise ValueError("denominator is identically zero")
        lead = d[0]
        object.__setattr__(self, "num", tuple(n / lead))
        object.__setattr__(self, "den", tuple(d / lead))

    @classmethod
    def gain(cls, k: float) -> "TransferFunction":
        return cls([k], [1.0])

    def __call__(self, s: complex) -> complex:
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def __mul__(self, other: "TransferFunction | float") -> "TransferFunction":
        if not isinstance(other, TransferFunction):
            other = TransferFunction.gain(float(other))
        return TransferFunction(np.polymul(self.num, other.num), np.polymul(self.den, other.den))

    __rmul__ = __mul__

    def __add__(self, other: "TransferFunction") -> "TransferFunction":
        num = np.polyadd(np.polymul(self.num, other.den), np.polymul(other.num, self.den))
        return TransferFunction(num, np.polymul(self.den, other.den))

    def feedback(self, H: "TransferFunction | float" = 1.0, sign: int = -1) -> "TransferFunction":
        """Closed loop G / (1 - sign*G*H)."""
        if not isinstance(H, TransferFunction):
            H = TransferFunction.gain(float(H))
        num = np.polymul(self.num, H.den)
        den = np.polyadd(np.polymul(self.den, H.den), -sign * np.polymul(self.num, H.num))
        return TransferFunction(num, den)

    def poles(self) -> np.ndarray:
        return polynomial_roots(self.den) if len(self.den) > 1 else np.array([], dtype=complex)

    def zeros(self) -> np.ndarray:
        return polynomial_roots(self.num) if len(self.num) > 1 else np.array([], dtype=complex)

    def cancel_origin(self) -> "TransferFunction":
        """Remove common factors of s shared by numerator and denominator."""
        n, d = np.array(self.num), np.array(self.den)
        while len(n) > 1 and len(d) > 1 and n[-1] == 0.0 and d[-1] == 0.0:
            n, d = n[:-1], d[:-1]
        return TransferFunction(n, d)

    def integrate(self) -> "TransferFunction":
        """Multiply by 1/s."""
        return TransferFunction(self.num, np.polymul(self.den, [1.0, 0.0]))

    def __repr__(self) -> str:
        return f"TransferFunction(num={list(self.num)}, den={list(self.den)})"


def lfc_avr_transfer_functions(lin, c: ReducedCoefficients) -> dict[str, TransferFunction]:
    """Decoupled LFC and AVR loops from the reduced linearization ``lin``.

    Keys: ``G_lfc`` (u_T to omega with the governor loop open), ``H_lfc``,
    ``omega_over_Tm``, ``omega_over_uT`` and ``delta_over_uT`` (governor loop
    closed), ``G_avr`` (E_FD to V_t) and ``avr_closed`` (unity feedback).
    """
    A = np.asarray(lin.A)
    Cm = np.asarray(lin.C)
    A23 = A[1, 2]
    T1 = Cm[0, 0]
    swing = [1.0, -c.f27, -A23]
    omega_over_Tm = TransferFunction(np.array([c.f28, 0.0]), swing)
    gv = TransferFunction([c.g55], [1.0, -c.f52])
    tm = TransferFunction([c.f42], [1.0, -c.f41])
    G_lfc = gv * tm * omega_over_Tm
    H_lfc = TransferFunction.gain(-c.f51 / c.g55)
    omega_over_uT = G_lfc.feedback(H_lfc)
    # omega_over_uT carries a zero at the origin; delta = omega/s cancels it
    num = np.asarray(omega_over_uT.num)
    if abs(num[-1]) > 1e-12 * np.max(np.abs(num)):
        raise ValueError("omega/u_T lost its zero at the origin")
    delta_over_uT = TransferFunction(num[:-1], omega_over_uT.den)
    G_avr = TransferFunction([T1 * c.g11], [1.0, -c.f11])
    return {
        "G_lfc": G_lfc,
        "H_lfc": H_lfc,
        "omega_over_Tm": omega_over_Tm,
        "omega_over_uT": omega_over_uT,
        "delta_over_uT": delta_over_uT,
        "G_avr": G_avr,
        "avr_closed": G_avr.feedback(1.0),
    }


def coupled_linear_model(lin, coupled: bool = True):
    """(A, B, C) of the linearized reduced plant with or without the weak LFC/AVR coupling.

    The decoupled form zeroes ``A13`` (delta into E'_q), ``A21`` (E'_q into
    omega) and the ``T2`` entry of the V_t row.
    """
    A = np.array(lin.A, dtype=float)
    C = np.array(lin.C, dtype=float)
    if not coupled:
        A[0, 2] = 0.0
        A[1, 0] = 0.0
        C[0, 2] = 0.0
    return A, np.array(lin.B, dtype=float), C
