"""Equilibria and linear state-space models of both plants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import reduced_model as rm
from . import truth_model as tm
from ._io import atomic_write_text
from .numlin import polynomial_roots
from .params import MachineParams, ReducedCoefficients, TruthCoefficients


class EquilibriumError(RuntimeError):
    """No equilibrium satisfies the requested anchors."""


class FinalValueUndefined(ValueError):
    """The final value theorem does not apply to this transfer function."""


@dataclass(frozen=True)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    state_labels: tuple = ()
    input_labels: tuple = ()
    output_labels: tuple = ()
    x0: np.ndarray = field(default_factory=lambda: np.zeros(0))
    u0: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        n = self.A.shape[0]
        m = self.B.shape[1]
        p = self.C.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.C.shape[1] != n or self.D.shape != (p, m):
            raise ValueError("inconsistent state-space dimensions")
        for M in (self.A, self.B, self.C, self.D):
            if not np.all(np.isfinite(M)):
                raise ValueError("state-space matrices must be finite")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def to_csv(self) -> str:
        lines = ["# statespace"]
        lines.append("# states: " + ",".join(self.state_labels))
        lines.append("# inputs: " + ",".join(self.input_labels))
        lines.append("# outputs: " + ",".join(self.output_labels))
        if self.x0.size:
            lines.append("# x0: " + ",".join(f"{v:.17g}" for v in self.x0))
        if self.u0.size:
            lines.append("# u0: " + ",".join(f"{v:.17g}" for v in self.u0))
        for name in "ABCD":
            lines.append(f"# {name}")
            for row in getattr(self, name):
                lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        atomic_write_text(path, self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "StateSpaceModel":
        blocks: dict[str, list[list[float]]] = {}
        meta: dict[str, str] = {}
        current = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body in ("A", "B", "C", "D"):
                    current = body
                    blocks[current] = []
                elif ":" in body:
                    key, val = body.split(":", 1)
                    meta[key.strip()] = val.strip()
                continue
            if current is None:
                raise ValueError("matrix row before any section header")
            blocks[current].append([float(v) for v in line.split(",")])
        n = len(blocks.get("A", []))
        m = len(blocks["B"][0]) if blocks.get("B") else 0
        p = len(blocks.get("C", []))
        mats = {k: np.array(blocks.get(k) or np.zeros((r, c)), dtype=float).reshape(r, c)
                for k, (r, c) in {"A": (n, n), "B": (n, m), "C": (p, n), "D": (p, m)}.items()}
        labels = lambda key: tuple(s for s in meta.get(key, "").split(",") if s)  # noqa: E731
        vec = lambda key: np.array([float(v) for v in meta[key].split(",")]) if key in meta else np.zeros(0)  # noqa: E731
        return cls(mats["A"], mats["B"], mats["C"], mats["D"], labels("states"), labels("inputs"),
                   labels("outputs"), vec("x0"), vec("u0"))


@dataclass(frozen=True)
class Equilibrium:
    model: str
    x0: np.ndarray
    u0: np.ndarray
    residual_norm: float
    anchors: dict


def numeric_jacobian(f: Callable[[np.ndarray], np.ndarray], x, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences with step ``rel_step * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))
    J = np.zeros((f0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h)
    return J


def damped_newton(g: Callable[[np.ndarray], np.ndarray], z0, tol: float = 1e-12, max_iter: int = 200,
                  max_halvings: int = 30) -> tuple[np.ndarray, float]:
    z = np.array(z0, dtype=float)
    r = g(z)
    norm = float(np.linalg.norm(r, np.inf))
    for _ in range(max_iter):
        if norm <= tol:
            return z, norm
        J = numeric_jacobian(g, z)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise EquilibriumError(f"singular Jacobian, residual {norm:.3e}") from exc
        lam = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            zn = z + lam * step
            rn = g(zn)
            nn = float(np.linalg.norm(rn, np.inf))
            if nn < norm:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            # stalled at rounding level; callers judge the residual
            return z, norm
        z, r, norm = zn, rn, nn
    if norm > 1e-9:
        raise EquilibriumError(f"Newton did not converge in {max_iter} iterations, residual {norm:.3e}")
    return z, norm


def _reduced_equilibrium(delta0: float, Tm0: float, c: ReducedCoefficients) -> Equilibrium:
    s = math.sin(delta0 - c.alpha)
    co = math.cos(delta0 - c.alpha)
    # omega row at omega = 1 is a quadratic in E'_q
    qa = c.f21
    qb = c.f22 * co + c.f23 * s
    qc = c.f24 * s * co + c.f25 * co * co + c.f26 * s * s + c.f27 + c.f28 * Tm0
    if qa == 0.0:
        roots = [-qc / qb]
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0.0:
            raise EquilibriumError(f"no real E'_q for delta0={delta0}, Tm0={Tm0} (discriminant {disc:.3e})")
        sq = math.sqrt(disc)
        roots = [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)]
    positive = [r for r in roots if r > 0.0]
    if not positive:
        raise EquilibriumError(f"no positive E'_q root for delta0={delta0}, Tm0={Tm0}: {roots}")
    E0 = min(positive, key=lambda r: abs(r - 1.0))
    Gv0 = -c.f41 * Tm0 / c.f42
    EFD0 = -(c.f11 * E0 + c.f12 * co + c.f13 * s) / c.g11
    uT0 = -(c.f51 * 1.0 + c.f52 * Gv0) / c.g55

    def g(z):
        x = np.array([z[0], 1.0, delta0, Tm0, z[1]])
        r = rm.reduced_rhs(x, z[2:], c)
        return np.array([r[0], r[1], r[3], r[4]])

    z, res = damped_newton(g, [E0, Gv0, EFD0, uT0])
    x0 = np.array([z[0], 1.0, delta0, Tm0, z[1]])
    u0 = z[2:].copy()
    res = float(np.linalg.norm(rm.reduced_rhs(x0, u0, c), np.inf))
    return Equilibrium("reduced", x0, u0, res, {"delta0": delta0, "Tm0": Tm0})


def truth_initial_guess(delta0: float, Tm0: float, p: MachineParams, rc: ReducedCoefficients):
    eq = _reduced_equilibrium(delta0, Tm0, rc)
    E0 = eq.x0[0]
    Id, Iq = rm.algebraic_currents(E0, delta0, rc)
    IF = (E0 - rc.L2 * Id) / p.kM_F
    VF = p.r_F / p.kM_F * eq.u0[0]
    return np.array([Id, IF, 0.0, Iq, 0.0, eq.x0[4], VF, eq.u0[1]])


def _truth_equilibrium(delta0: float, Tm0: float, c: TruthCoefficients, p: MachineParams) -> Equilibrium:
    from .params import derive_reduced_coefficients

    z0 = truth_initial_guess(delta0, Tm0, p, derive_reduced_coefficients(p))

    def pack(z):
        return np.array([z[0], z[1], z[2], z[3], z[4], 1.0, delta0, Tm0, z[5]]), z[6:8]

    def g(z):
        x, u = pack(z)
        r = tm.truth_rhs(x, u, c)
        return np.delete(r, 6)

    z, _ = damped_newton(g, z0, tol=1e-13)
    x0, u0 = pack(z)
    res = float(np.linalg.norm(tm.truth_rhs(x0, u0, c), np.inf))
    if res > 1e-9:
        raise EquilibriumError(f"truth equilibrium residual {res:.3e}")
    return Equilibrium("truth", x0, np.array(u0, dtype=float), res, {"delta0": delta0, "Tm0": Tm0})


def find_equilibrium(model: str, anchors: dict, coeffs, params: MachineParams | None = None) -> Equilibrium:
    """Equilibrium with omega = 1 at the given ``delta0`` (rad) and ``Tm0`` anchors."""
    delta0 = float(anchors["delta0"])
    Tm0 = float(anchors["Tm0"])
    if not (math.isfinite(delta0) and math.isfinite(Tm0)):
        raise EquilibriumError("anchors must be finite")
    if not 0.0 < delta0 < math.pi:
        raise EquilibriumError(f"delta0={delta0} outside (0, pi)")
    if model == "reduced":
        eq = _reduced_equilibrium(delta0, Tm0, coeffs)
        if eq.residual_norm > 1e-9:
            raise EquilibriumError(f"reduced equilibrium residual {eq.residual_norm:.3e}")
        return eq
    if model == "truth":
        return _truth_equilibrium(delta0, Tm0, coeffs, params or MachineParams())
    raise ValueError(f"unknown model {model!r}")


def reduced_partials(x0, c: ReducedCoefficients) -> dict[str, float]:
    E0, d0 = float(x0[0]), float(x0[2])
    s = math.sin(d0 - c.alpha)
    co = math.cos(d0 - c.alpha)
    s2 = math.sin(2.0 * (d0 - c.alpha))
    c2 = math.cos(2.0 * (d0 - c.alpha))
    return {
        "A13": -c.f12 * s + c.f13 * co,
        "A21": 2.0 * c.f21 * E0 + c.f22 * co + c.f23 * s,
        "A23": -c.f22 * E0 * s + c.f23 * E0 * co + c.f24 * c2 - c.f25 * s2 + c.f26 * s2,
    }


def output_sensitivities(x0, c: ReducedCoefficients) -> tuple[float, float]:
    """T1 = dV_t/dE'_q and T2 = dV_t/d(delta) at ``x0``."""
    d0 = float(x0[2])
    s = math.sin(d0 - c.alpha)
    co = math.cos(d0 - c.alpha)
    Vd0, Vq0 = rm.stator_voltages(x0, c)
    Vt0 = math.hypot(Vd0, Vq0)
    if Vt0 == 0.0:
        raise ZeroDivisionError("V_t0 = 0: output sensitivities undefined")
    a, b = Vd0 / Vt0, Vq0 / Vt0
    T1 = a * c.Vd1 + b * c.Vq1 + b
    T2 = a * (-c.Vd2 * s + c.Vd3 * co) + b * (-c.Vq2 * s + c.Vq3 * co)
    return T1, T2


def linearize_reduced(eq: Equilibrium, c: ReducedCoefficients) -> StateSpaceModel:
    res = float(np.linalg.norm(rm.reduced_rhs(eq.x0, eq.u0, c), np.inf))
    if res > 1e-6:
        raise EquilibriumError(f"not an equilibrium (residual {res:.3e})")
    pd = reduced_partials(eq.x0, c)
    A = np.array([
        [c.f11, 0.0, pd["A13"], 0.0, 0.0],
        [pd["A21"], c.f27, pd["A23"], c.f28, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, c.f41, c.f42],
        [0.0, c.f51, 0.0, 0.0, c.f52],
    ])
    B = np.array([[c.g11, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, c.g55]])
    T1, T2 = output_sensitivities(eq.x0, c)
    C = np.array([[T1, 0.0, T2, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0]])
    return StateSpaceModel(A, B, C, np.zeros((2, 2)), rm.STATE_LABELS, rm.INPUT_LABELS, rm.OUTPUT_LABELS,
                           np.array(eq.x0), np.array(eq.u0))


def numeric_reduced_jacobians(x0, u0, c: ReducedCoefficients) -> tuple[np.ndarray, np.ndarray]:
    A = numeric_jacobian(lambda x: rm.reduced_rhs(x, u0, c), x0)
    B = numeric_jacobian(lambda u: rm.reduced_rhs(x0, u, c), u0)
    return A, B


def linearize_truth(eq: Equilibrium, c: TruthCoefficients) -> StateSpaceModel:
    x0, u0 = np.asarray(eq.x0, dtype=float), np.asarray(eq.u0, dtype=float)
    res = float(np.linalg.norm(tm.truth_rhs(x0, u0, c), np.inf))
    if res > 1e-6:
        raise EquilibriumError(f"not an equilibrium (residual {res:.3e})")
    if tm.truth_output(x0, u0, c)[0] == 0.0:
        raise ZeroDivisionError("V_t0 = 0: output Jacobian undefined")
    A = numeric_jacobian(lambda x: tm.truth_rhs(x, u0, c), x0)
    B = numeric_jacobian(lambda u: tm.truth_rhs(x0, u, c), u0)
    C = numeric_jacobian(lambda x: tm.truth_output(x, u0, c), x0)
    D = numeric_jacobian(lambda u: tm.truth_output(x0, u, c), u0)
    return StateSpaceModel(A, B, C, D, tm.STATE_LABELS, tm.INPUT_LABELS, tm.OUTPUT_LABELS, x0, u0)


def final_value(tf) -> float:
    """Steady-state response of ``tf`` to a unit step, lim s->0 of s * tf(s) / s."""
    poles = tf.poles()
    scale = max(1.0, float(np.max(np.abs(poles)))) if poles.size else 1.0
    bad = [p for p in poles if p.real >= -1e-12 * scale]
    if bad:
        raise FinalValueUndefined(f"poles not in the open left half-plane: {bad}")
    return float(tf.num[-1] / tf.den[-1])


def first_order_check(x0, dx, c: ReducedCoefficients) -> float:
    """Ratio of the linear V_t prediction to the actual nonlinear change."""
    T1, T2 = output_sensitivities(x0, c)
    x0 = np.asarray(x0, dtype=float)
    dx = np.asarray(dx, dtype=float)
    actual = rm.reduced_output(x0 + dx, c)[0] - rm.reduced_output(x0, c)[0]
    return (T1 * dx[0] + T2 * dx[2]) / actual


__all__ = [
    "StateSpaceModel", "Equilibrium", "EquilibriumError", "FinalValueUndefined",
    "find_equilibrium", "linearize_reduced", "linearize_truth", "final_value",
    "numeric_jacobian", "damped_newton", "reduced_partials", "output_sensitivities",
    "numeric_reduced_jacobians", "first_order_check", "polynomial_roots",
]
