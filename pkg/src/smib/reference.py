"""Published numbers the acceptance checks compare against (OP I unless stated)."""

from __future__ import annotations

import numpy as np

DERIVED_CONSTANTS = {"L_d_prime": 0.245, "tau_d0_prime": 5.90, "tau_j": 4.74}

REDUCED_COEFFICIENTS = {
    "Vd1": -0.0249, "Vd2": 0.0249, "Vd3": -0.8037,
    "Vq1": -0.3797, "Vq2": 0.3797, "Vq3": 0.0037,
    "f11": -0.5517, "f12": 0.3822, "f13": 0.0037,
    "f21": -0.0101, "f22": 0.0171, "f23": -0.3269, "f24": 0.2235,
    "f25": -0.0069, "f26": 0.0022, "f27": 0.0, "f28": 0.2110,
    "f41": -2.0, "f42": 2.0, "f51": -0.25, "f52": -5.0,
    "g11": 0.1695, "g55": 5.0,
    "L_d_prime": 0.245, "tau_d0_prime": 5.90, "tau_j": 4.74,
}
# keys checked against the parameter set rather than the coefficient record
LIMIT_VALUES = {"E_FD_max": 5.0, "E_FD_min": -5.0, "G_V_max": 1.2, "G_V_min": 0.0}

REDUCED_A = np.array([
    [-0.5517, 0.0, -0.3060, 0.0, 0.0],
    [-0.2776, 0.0, -0.3054, 0.2110, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -2.0, 2.0],
    [0.0, -0.25, 0.0, 0.0, -5.0],
])
REDUCED_B = np.array([[0.1695, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 5.0]])
REDUCED_C = np.array([[0.5258, 0.0, 0.0294, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0]])
REDUCED_EIGENVALUES = np.array([-5.0069, -0.1048 + 0.4778j, -0.1048 - 0.4778j, -0.3514, -1.9839])

TRUTH_EIGENVALUES = np.array([
    -5.0, -0.0359 + 0.9983j, -0.0359 - 0.9983j, -2.0, -0.0016 + 0.0289j,
    -0.0016 - 0.0289j, -0.0007, -0.0995, -0.1217,
])
TRUTH_D11 = 0.1333

REDUCED_EQUILIBRIUM = np.array([1.1925, 1.0, 1.0, 1.0012, 1.0012])
E_FD0 = 2.529
U_T0 = 1.0512
V_F0 = 0.00121

DELTA_SS = 0.6909
OMEGA_SS = 0.0
AVR_VT_SS = 0.1391

LQR_K = np.array([
    [23.7240, -36.3457, -5.5938, -2.5612, -0.0454],
    [-1.3381, 21.0340, 1.5703, 9.0242, 21.5437],
])

FBL_TARGET = {"V_t": 1.172, "delta": 1.0, "omega": 1.0}

SWEEP = {
    "lqr_op2_vt": 1.0182,
    "lqr_op3_vt": 1.3964,
    "lqr_delta_error": 3e-3,
    "ltr_op2_vt_error": 0.0259,
    "ltr_op2_delta_error": 0.0575,
    "ltr_op3_vt": 1.403,
}
