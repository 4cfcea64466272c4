"""Controller synthesis: LQR, pole placement, observers, LTR-tuned Kalman gains, PID and root loci."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

import numpy as np

from .numlin import DesignFailure, care_residual, eigenvalues, poly_from_roots, polynomial_roots, solve_care
from .reduced_model import TransferFunction


class UnsupportedConfiguration(DesignFailure):
    """The requested pole pattern cannot be produced by this placement method."""


def _mat(M) -> np.ndarray:
    return np.atleast_2d(np.asarray(M, dtype=float))


def _ab(ss_or_A, B=None):
    if B is None:
        return _mat(ss_or_A.A), _mat(ss_or_A.B)
    return _mat(ss_or_A), _mat(B)


def match_spectra(got, want) -> float:
    """Largest distance after greedily pairing each requested value with its nearest unused match."""
    got = list(np.asarray(got, dtype=complex))
    want = np.asarray(want, dtype=complex)
    if len(got) != len(want):
        return float("inf")
    worst = 0.0
    for w in sorted(want, key=lambda z: (z.real, z.imag)):
        j = int(np.argmin([abs(g - w) for g in got]))
        worst = max(worst, abs(got.pop(j) - w))
    return worst


# ---------------------------------------------------------------- gain containers

@dataclass(frozen=True)
class GainMatrix:
    K: np.ndarray
    method: str
    inputs: dict = field(default_factory=dict)

    def closed_loop(self, A, B) -> np.ndarray:
        A, B = _ab(A, B)
        if self.K.shape != (B.shape[1], A.shape[0]):
            raise ValueError(f"gain shape {self.K.shape} does not fit an ({A.shape[0]}, {B.shape[1]}) pair")
        return A - B @ self.K


@dataclass(frozen=True)
class ObserverGain:
    L: np.ndarray
    outputs: str  # "Vt" or "Vt_omega"
    method: str = "place"
    inputs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LtrSchedule:
    V10: np.ndarray
    V20: np.ndarray
    V: np.ndarray
    q: float

    def __post_init__(self) -> None:
        for name in ("V10", "V20", "V"):
            M = _mat(getattr(self, name))
            if M.shape[0] != M.shape[1] or not np.allclose(M, M.T) or np.min(np.linalg.eigvalsh(M)) <= 0:
                raise ValueError(f"{name} must be symmetric positive definite")
        if not self.q >= 0:
            raise ValueError("q must be non-negative")

    def V1(self, B) -> np.ndarray:
        B = _mat(B)
        return _mat(self.V10) + self.q ** 2 * B @ _mat(self.V) @ B.T


def output_selector(C) -> str:
    return "Vt" if _mat(C).shape[0] == 1 else "Vt_omega"


# ---------------------------------------------------------------- LQR

def lqr_gain(ss, Q, R, B=None) -> GainMatrix:
    """K = R^-1 B^T P from the stabilizing CARE solution; pass ``(A, Q, R, B=B)`` or a model."""
    A, B = _ab(ss, B)
    Q = _mat(Q)
    R = _mat(R)
    if np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))) < -1e-12 * max(1.0, np.abs(Q).max()):
        raise DesignFailure("Q must be positive semidefinite")
    P = solve_care(A, B, Q, R)
    K = np.linalg.solve(R, B.T @ P)
    ev = eigenvalues(A - B @ K)
    if not np.all(ev.real < 0):
        raise DesignFailure(f"LQR closed loop not Hurwitz: {ev}")
    res = float(np.linalg.norm(care_residual(A, B, Q, R, P), np.inf))
    return GainMatrix(K, "lqr", {"Q": Q, "R": R, "P": P, "care_residual": res})


# ---------------------------------------------------------------- pole placement

def controllability_matrix(A, B) -> np.ndarray:
    A, B = _mat(A), _mat(B)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def controllability_rank(A, B) -> int:
    Wc = controllability_matrix(A, B)
    s = np.linalg.svd(Wc, compute_uv=False)
    return int(np.sum(s > 1e-9 * s[0])) if s.size and s[0] > 0 else 0


def ackermann(A, b, poles) -> np.ndarray:
    """Single-input gain row k with eig(A - b k) equal to ``poles``."""
    A = _mat(A)
    b = np.asarray(b, dtype=float).reshape(-1, 1)
    n = A.shape[0]
    coeffs = np.real(poly_from_roots(poles))
    phi = np.zeros_like(A)
    for c in coeffs:  # Horner
        phi = phi @ A + c * np.eye(n)
    Wc = controllability_matrix(A, b)
    en = np.zeros(n)
    en[-1] = 1.0
    return np.linalg.solve(Wc.T, en) @ phi


def _check_pole_list(poles, n: int, m: int) -> np.ndarray:
    p = np.asarray(poles, dtype=complex).ravel()
    if p.size != n:
        raise ValueError(f"need {n} poles, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise ValueError("poles must be finite")
    scale = max(1.0, float(np.abs(p).max()))
    for z in p[np.abs(p.imag) > 1e-12 * scale]:
        if np.min(np.abs(p - np.conj(z))) > 1e-9 * scale:
            raise ValueError(f"pole list is not closed under conjugation ({z})")
    for z in p:
        if int(np.sum(np.abs(p - z) <= 1e-9 * scale)) > m:
            raise UnsupportedConfiguration(f"pole {z} repeated more often than the {m} available inputs")
    return p


def place_poles(A, B, poles, seed: int = 0, retries: int = 10, tol: float = 1e-6) -> GainMatrix:
    """State feedback with eig(A - B K) = ``poles``.

    Candidates come from the Heymann reduction followed by Ackermann and, with more
    than one input, from direct eigenvector assignment. Among candidates that meet
    ``tol`` the one with the smallest Frobenius norm is returned. Deterministic in ``seed``.
    """
    A, B = _mat(A), _mat(B)
    n, m = A.shape[0], B.shape[1]
    p = _check_pole_list(poles, n, m)
    rank = controllability_rank(A, B)
    if rank < n:
        raise DesignFailure(f"(A, B) is not controllable: rank {rank} < {n} (defect {n - rank})")
    rng = np.random.default_rng(seed)
    scale = max(1.0, float(np.abs(A).max()))
    cands = []
    for attempt in range(retries + 1):
        if m == 1:
            v, F0 = np.ones(1), np.zeros((1, n))
        else:
            v = rng.standard_normal(m)
            v /= np.linalg.norm(v)
            # a preliminary feedback makes the closed loop cyclic, needed for single-input control through B v
            F0 = np.zeros((m, n)) if attempt == 0 else rng.standard_normal((m, n)) * scale
        A0 = A + B @ F0
        b = (B @ v).reshape(-1, 1)
        Wc = controllability_matrix(A0, b)
        cond = np.linalg.cond(Wc)
        if not np.isfinite(cond) or cond > 1e12:
            continue
        K = np.outer(v, ackermann(A0, b, p)) - F0
        cands.append((K, match_spectra(eigenvalues(A - B @ K), p), "heymann"))
        if m == 1:
            break
    if m > 1:
        # single-input reduction puts repeated poles in one Jordan block and tends to inflate gains
        for _ in range(retries + 1):
            K = _eigenstructure_place(A, B, p, rng)
            if K is not None:
                cands.append((K, match_spectra(eigenvalues(A - B @ K), p), "eigenvector"))
    if not cands:
        raise DesignFailure("pole placement failed: every reduction was ill-conditioned")
    good = [c for c in cands if c[1] <= tol]
    if not good:
        err = min(c[1] for c in cands)
        raise DesignFailure(f"pole placement missed the requested spectrum by {err:.3e}")
    K, err, how = min(good, key=lambda c: float(np.linalg.norm(c[0])))
    return GainMatrix(K, "place", {"poles": p, "seed": seed, "spectrum_error": err, "route": how})


def _has_repeats(p: np.ndarray) -> bool:
    scale = max(1.0, float(np.abs(p).max()))
    return any(int(np.sum(np.abs(p - z) <= 1e-9 * scale)) > 1 for z in p)


def _eigenstructure_place(A, B, p, rng) -> np.ndarray | None:
    """K = W V^-1 with closed-loop eigenvectors v_i = (A - p_i I)^-1 B w_i for random w_i."""
    n, m = A.shape[0], B.shape[1]
    V = np.zeros((n, n), dtype=complex)
    W = np.zeros((m, n), dtype=complex)
    done = np.zeros(n, dtype=bool)
    for i, lam in enumerate(p):
        if done[i]:
            continue
        M = A - lam * np.eye(n)
        if np.linalg.cond(M) > 1e12:
            return None
        w = rng.standard_normal(m) + (1j * rng.standard_normal(m) if lam.imag != 0 else 0.0)
        V[:, i] = np.linalg.solve(M, B @ w)
        W[:, i] = w
        done[i] = True
        if lam.imag != 0:
            j = next(k for k in range(n) if not done[k] and abs(p[k] - np.conj(lam)) <= 1e-9 * max(1.0, abs(lam)))
            V[:, j] = np.conj(V[:, i])
            W[:, j] = np.conj(w)
            done[j] = True
    if np.linalg.cond(V) > 1e12:
        return None
    return np.real(np.linalg.solve(V.T, W.T).T)


def observability_rank(A, C) -> int:
    return controllability_rank(_mat(A).T, _mat(C).T)


def observer_gain(A, C, poles=None, rho: float | None = None, controller_poles=None,
                  seed: int = 0) -> ObserverGain:
    """Luenberger gain L with eig(A - L C) at ``poles``, or at ``rho`` times ``controller_poles``."""
    A, C = _mat(A), _mat(C)
    n = A.shape[0]
    rank = observability_rank(A, C)
    if rank < n:
        raise DesignFailure(f"(C, A) is not observable: rank {rank} < {n}")
    if poles is None:
        if rho is None or controller_poles is None:
            raise ValueError("give either poles or rho with controller_poles")
        cp = np.asarray(controller_poles, dtype=complex)
        if not np.all(cp.real < 0):
            raise ValueError("controller poles must be stable to scale them")
        poles = rho * cp
    g = place_poles(A.T, C.T, poles, seed=seed)
    L = g.K.T
    if not np.all(eigenvalues(A - L @ C).real < 0):
        raise DesignFailure("estimator is not Hurwitz")
    return ObserverGain(L, output_selector(C), "place", {"poles": np.asarray(poles), "rho": rho})


def kalman_ltr_gain(ss, sched: LtrSchedule, C=None, B=None) -> ObserverGain:
    """H(q) = Sigma C^T V2^-1 with Sigma the filter Riccati solution for V1(q) = V10 + q^2 B V B^T."""
    if C is None:
        A, B, C = _mat(ss.A), _mat(ss.B), _mat(ss.C)
    else:
        A, B, C = _mat(ss), _mat(B), _mat(C)
    V1 = sched.V1(B)
    V2 = _mat(sched.V20)
    try:
        Sigma = solve_care(A.T, C.T, V1, V2)
    except DesignFailure as exc:
        raise DesignFailure(f"Kalman Riccati failed at q={sched.q}: {exc}") from exc
    H = Sigma @ C.T @ np.linalg.inv(V2)
    ev = eigenvalues(A - H @ C)
    if not np.all(ev.real < 0):
        raise DesignFailure(f"estimator not Hurwitz at q={sched.q}: {ev}")
    return ObserverGain(H, output_selector(C), "ltr", {"q": sched.q, "Sigma": Sigma})


def ltr_asymptote_gap(ss, sched: LtrSchedule) -> float:
    """Frobenius distance between H(q)/q and its large-q limit B V^1/2 V2^-1/2."""
    H = kalman_ltr_gain(ss, sched).L
    B = _mat(ss.B)
    lim = B @ _sqrtm_spd(_mat(sched.V)) @ np.linalg.inv(_sqrtm_spd(_mat(sched.V20)))
    return float(np.linalg.norm(H / sched.q - lim, "fro"))


def _sqrtm_spd(M: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    return (U * np.sqrt(w)) @ U.T


def separation_matrix(A, B, C, K, L) -> np.ndarray:
    """Plant plus estimator under u = -K x_hat, in (x, e = x - x_hat) coordinates."""
    A, B, C, K, L = map(_mat, (A, B, C, K, L))
    n = A.shape[0]
    top = np.hstack([A - B @ K, B @ K])
    bot = np.hstack([np.zeros((n, n)), A - L @ C])
    return np.vstack([top, bot])


# ---------------------------------------------------------------- PID

@dataclass(frozen=True)
class PidGains:
    Kp: float
    Ki: float
    Kd: float
    loop: str = "LFC"

    def __post_init__(self) -> None:
        if not all(np.isfinite([self.Kp, self.Ki, self.Kd])):
            raise ValueError("PID gains must be finite")
        if self.loop not in ("LFC", "AVR"):
            raise ValueError(f"unknown loop tag {self.loop!r}")


@dataclass(frozen=True)
class PidController:
    gains: PidGains
    tf: TransferFunction
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    N: float


def pid_controller(g: PidGains, N: float = 100.0) -> PidController:
    """Ideal transfer function plus a proper two-state realization with a filtered derivative.

    States are the error integral and the derivative filter state.
    """
    if g.Ki == 0.0 and g.Kd == 0.0:
        tf = TransferFunction.gain(g.Kp)
    else:
        tf = TransferFunction([g.Kd, g.Kp, g.Ki], [1.0, 0.0])
    # Kd s/(1 + s/N) = Kd N - Kd N^2/(s + N)
    A = np.array([[0.0, 0.0], [0.0, -N]])
    B = np.array([1.0, 1.0])
    C = np.array([g.Ki, -g.Kd * N * N])
    D = g.Kp + g.Kd * N
    return PidController(g, tf, A, B, C, D, N)


def root_locus(open_loop: TransferFunction, gains) -> np.ndarray:
    """Closed-loop roots of den + k num for each k, rows ordered for branch continuity."""
    num = np.asarray(open_loop.num, dtype=float)
    den = np.asarray(open_loop.den, dtype=float)
    if len(num) > len(den):
        raise ValueError("improper open loop: numerator degree exceeds denominator degree")
    ks = np.asarray(gains, dtype=float)
    if np.any(ks <= 0) or np.any(np.diff(ks) <= 0):
        raise ValueError("gains must be positive and ascending")
    n = len(den) - 1
    prev = polynomial_roots(den) if n > 0 else np.zeros(0, dtype=complex)
    out = np.zeros((len(ks), n), dtype=complex)
    for i, k in enumerate(ks):
        r = list(polynomial_roots(np.polyadd(den, k * num)))
        ordered = np.zeros(n, dtype=complex)
        for j, p in enumerate(prev):
            idx = int(np.argmin([abs(z - p) for z in r]))
            ordered[j] = r.pop(idx)
        out[i] = ordered
        prev = ordered
    return out


# ---------------------------------------------------------------- serialization

def gains_to_text(gains: dict[str, np.ndarray], meta: dict | None = None) -> str:
    """Sectioned key=value text; each matrix becomes ``[gain.<name>]`` with ``rowN`` comma lists."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if meta:
        cp["meta"] = {k: str(v) for k, v in meta.items()}
    for name, M in gains.items():
        M = _mat(M)
        cp[f"gain.{name}"] = {f"row{i}": ",".join(f"{v:.17g}" for v in row) for i, row in enumerate(M)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_gains(text: str) -> dict[str, np.ndarray]:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    out = {}
    for sec in cp.sections():
        if not sec.startswith("gain."):
            continue
        keys = sorted(cp[sec], key=lambda k: int(k[3:]))
        out[sec[5:]] = np.array([[float(v) for v in cp[sec][k].split(",")] for k in keys])
    return out
