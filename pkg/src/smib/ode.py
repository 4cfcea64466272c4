"""Explicit Runge-Kutta integrators (fixed-step RK4, adaptive Dormand-Prince 5(4)) and a stiff fallback.

The explicit methods march along a prescribed output grid and accept an optional
projection applied after every accepted step (used for state limits). ``lsoda``
delegates to scipy for stiff closed loops and ignores the projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

Rhs = Callable[[float, np.ndarray], np.ndarray]
Projection = Callable[[np.ndarray], np.ndarray]


@dataclass
class OdeResult:
    t: np.ndarray
    y: np.ndarray
    n_ok: int
    message: str = ""
    n_rhs: int = 0

    @property
    def success(self) -> bool:
        return self.n_ok == len(self.t)


def rk4_step(f: Rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
# difference between the 5th and embedded 4th order weights (last entry multiplies k7)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _finite(y: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(y)))


def integrate(f: Rhs, y0, t_grid, method: str = "rk45", dt: float = 1e-3,
              rtol: float = 1e-8, atol: float = 1e-10, max_step: float = math.inf,
              post: Projection | None = None, max_rhs: int = 50_000_000) -> OdeResult:
    """Integrate ``y' = f(t, y)`` and sample at ``t_grid`` (strictly increasing).

    ``method`` is ``"rk4"`` (fixed step ``dt``, substeps evenly split per
    interval) or ``"rk45"`` (adaptive, tolerances ``rtol``/``atol``).
    Integration stops early on a non-finite state; ``n_ok`` counts valid samples.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    y = np.array(y0, dtype=float)
    if post is not None:
        y = post(y)
    Y = np.full((len(t_grid), len(y)), np.nan)
    Y[0] = y
    counter = [0]

    def F(t, z):
        counter[0] += 1
        return f(t, z)

    if method == "rk4":
        for i in range(1, len(t_grid)):
            t0, t1 = t_grid[i - 1], t_grid[i]
            m = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
            h = (t1 - t0) / m
            for j in range(m):
                y = rk4_step(F, t0 + j * h, y, h)
                if post is not None:
                    y = post(y)
                if not _finite(y):
                    return OdeResult(t_grid, Y, i, f"non-finite state near t={t0 + (j + 1) * h:.6g}", counter[0])
            Y[i] = y
        return OdeResult(t_grid, Y, len(t_grid), "", counter[0])

    if method == "lsoda":
        return _lsoda(F, y, t_grid, Y, rtol, atol, max_step, counter)

    if method != "rk45":
        raise ValueError(f"unknown integrator {method!r}")

    t = float(t_grid[0])
    k1 = F(t, y)
    if not _finite(k1):
        return OdeResult(t_grid, Y, 1, "non-finite rates at start", counter[0])
    scale = atol + rtol * np.abs(y)
    d0 = float(np.sqrt(np.mean((y / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((k1 / scale) ** 2)))
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h = min(h, max_step, t_grid[-1] - t)
    i_next = 1
    while i_next < len(t_grid):
        if counter[0] > max_rhs:
            return OdeResult(t_grid, Y, i_next, f"rhs budget exhausted at t={t:.6g}", counter[0])
        t_target = t_grid[i_next]
        remaining = t_target - t
        hit = h >= remaining * (1.0 - 1e-12)
        h_try = remaining if hit else h
        ks = [k1]
        for s in range(1, 6):
            yi = y + h_try * sum(a * k for a, k in zip(_A[s], ks))
            ks.append(F(t + _C[s] * h_try, yi))
        y_new = y + h_try * sum(b * k for b, k in zip(_B, ks))
        k7 = F(t + h_try, y_new)
        err_vec = h_try * (sum(e * k for e, k in zip(_E[:6], ks)) + _E[6] * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / sc) ** 2)))
        if not math.isfinite(err):
            h = 0.1 * h_try
            if h < 1e-14 * max(1.0, abs(t)):
                return OdeResult(t_grid, Y, i_next, f"non-finite state near t={t:.6g}", counter[0])
            continue
        fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        if err <= 1.0:
            t = t_target if hit else t + h_try
            y = y_new
            if post is not None:
                yp = post(y)
                if not np.array_equal(yp, y):
                    y = yp
                    k7 = F(t, y)
            k1 = k7
            if hit:
                Y[i_next] = y
                i_next += 1
            # a landing step shorter than proposed says nothing about growing h
            h = min(max_step, h_try * fac if not hit or fac < 1.0 else max(h, h_try * fac))
        else:
            h = h_try * max(0.1, fac)
            if h < 1e-14 * max(1.0, abs(t)):
                return OdeResult(t_grid, Y, i_next, f"step size underflow at t={t:.6g}", counter[0])
    return OdeResult(t_grid, Y, len(t_grid), "", counter[0])


def _lsoda(F: Rhs, y: np.ndarray, t_grid: np.ndarray, Y: np.ndarray, rtol: float, atol: float,
           max_step: float, counter: list) -> OdeResult:
    sol = solve_ivp(F, (t_grid[0], t_grid[-1]), y, method="LSODA", t_eval=t_grid, rtol=rtol, atol=atol,
                    max_step=max_step)
    k = len(sol.t)
    if k:
        Y[:k] = sol.y.T
    bad = np.flatnonzero(~np.all(np.isfinite(Y[:k]), axis=1))
    if bad.size:
        k = int(bad[0])
    msg = "" if sol.status == 0 and k == len(t_grid) else f"stiff solver stopped near t={t_grid[max(k - 1, 0)]:.6g}: {sol.message}"
    return OdeResult(t_grid, Y, k, msg, counter[0])
