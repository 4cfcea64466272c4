"""Ninth-order generator, line and turbine-governor plant.

State ``[I_d, I_F, I_D, I_q, I_Q, omega, delta, T_m, G_V]``, input ``[V_F, u_T]``.
Time is per-unit (radians of the base frequency), as implied by the swing
constant ``2*H*omega_R``.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .params import TruthCoefficients

STATE_LABELS = ("I_d", "I_F", "I_D", "I_q", "I_Q", "omega", "delta", "T_m", "G_V")
INPUT_LABELS = ("V_F", "u_T")
OUTPUT_LABELS = ("V_t", "omega")


def truth_rhs(x, u, c: TruthCoefficients) -> np.ndarray:
    Id, IF, ID, Iq, IQ, w, d, Tm, Gv = (float(v) for v in x)
    VF, uT = float(u[0]), float(u[1])
    s = math.sin(d - c.alpha)
    co = math.cos(d - c.alpha)
    Iqw = Iq * w
    IQw = IQ * w
    out = np.array([
        c.F11 * Id + c.F12 * IF + c.F13 * ID + c.F14 * Iqw + c.F15 * IQw + c.F16 * s + c.G11 * VF,
        c.F21 * Id + c.F22 * IF + c.F23 * ID + c.F24 * Iqw + c.F25 * IQw + c.F26 * s + c.G21 * VF,
        c.F31 * Id + c.F32 * IF + c.F33 * ID + c.F34 * Iqw + c.F35 * IQw + c.F36 * s + c.G31 * VF,
        (c.F41 * Id + c.F42 * IF + c.F43 * ID) * w + c.F44 * Iq + c.F45 * IQ + c.F46 * co,
        (c.F51 * Id + c.F52 * IF + c.F53 * ID) * w + c.F54 * Iq + c.F55 * IQ + c.F56 * co,
        (c.F61 * Id + c.F62 * IF + c.F63 * ID) * Iq + c.F64 * Id * IQ + c.F65 * w + c.F66 * Tm,
        w - 1.0,
        c.F81 * Tm + c.F82 * Gv,
        c.F91 * w + c.F92 * Gv + c.G92 * uT,
    ])
    if not np.all(np.isfinite(out)):
        warnings.warn(f"non-finite truth rates at x={list(x)}, u={list(u)}", RuntimeWarning, stacklevel=2)
    return out


def terminal_voltages(x, u, c: TruthCoefficients) -> tuple[float, float]:
    """Stator terminal voltage components (V_d, V_q)."""
    Id, IF, ID, Iq, IQ, w, d = (float(v) for v in x[:7])
    s = math.sin(d - c.alpha)
    co = math.cos(d - c.alpha)
    Vd = (c.y11 * Id + c.y12 * IF + c.y13 * ID + (c.y14 * Iq + c.y15 * IQ) * w
          + c.y16 * s + c.i11 * float(u[0]))
    Vq = (c.y21 * Id + c.y22 * IF + c.y23 * ID) * w + c.y24 * Iq + c.y25 * IQ + c.y26 * co
    return Vd, Vq


def truth_output(x, u, c: TruthCoefficients) -> np.ndarray:
    """Measured outputs ``[V_t, omega]``."""
    Vd, Vq = terminal_voltages(x, u, c)
    return np.array([math.hypot(Vd, Vq), float(x[5])])
