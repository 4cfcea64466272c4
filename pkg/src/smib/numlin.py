"""Small dense linear algebra: eigenvalues, polynomial roots, Lyapunov and Riccati solvers."""

from __future__ import annotations

import math

import numpy as np

from . import ode


class NumericalFailure(RuntimeError):
    """An iterative method did not converge."""


class DesignFailure(RuntimeError):
    """A synthesis step produced no valid (stabilizing) answer."""


def _as_matrix(A) -> np.ndarray:
    M = np.array(A, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def sort_spectrum(values) -> np.ndarray:
    v = np.asarray(values, dtype=complex)
    order = sorted(range(len(v)), key=lambda i: (v[i].real, v[i].imag))
    return v[order]


# ---------------------------------------------------------------- eigenvalues

def _balance(a: np.ndarray) -> None:
    """Diagonal similarity scaling by powers of two, in place."""
    radix = 2.0
    sqrdx = radix * radix
    n = a.shape[0]
    done = False
    while not done:
        done = True
        for i in range(n):
            c = float(np.sum(np.abs(a[:, i])) - abs(a[i, i]))
            r = float(np.sum(np.abs(a[i, :])) - abs(a[i, i]))
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f


def _hessenberg(a: np.ndarray) -> None:
    """Householder reduction to upper Hessenberg form, in place."""
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        a[k + 1:, :] -= 2.0 * np.outer(v, v @ a[k + 1:, :])
        a[:, k + 1:] -= 2.0 * np.outer(a[:, k + 1:] @ v, v)
        a[k + 2:, k] = 0.0


def _hqr(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR."""
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = 0.0
    for i in range(n):
        for j in range(max(i - 1, 0), n):
            anorm += abs(a[i, j])
    nn = n - 1
    t = 0.0
    budget = 100 * n * n
    total = 0
    x = y = w = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) + s == s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if total >= budget:
                raise NumericalFailure(f"QR iteration did not converge within {budget} sweeps")
            if its > 0 and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k, j] + q * a[k + 1, j]
                    if k != nn - 1:
                        p += r * a[k + 2, j]
                        a[k + 2, j] -= p * z
                    a[k + 1, j] -= p * y
                    a[k, j] -= p * x
                mmin = nn if nn < k + 3 else k + 3
                for i in range(l, mmin + 1):
                    p = x * a[i, k] + y * a[i, k + 1]
                    if k != nn - 1:
                        p += z * a[i, k + 2]
                        a[i, k + 2] -= p * r
                    a[i, k + 1] -= p * q
                    a[i, k] -= p
    return wr + 1j * wi


def eigenvalues(A) -> np.ndarray:
    """Spectrum of a real square matrix, sorted by (real, imag)."""
    a = _as_matrix(A)
    if a.shape[0] != a.shape[1]:
        raise ValueError("eigenvalues need a square matrix")
    if a.shape[0] == 0:
        return np.array([], dtype=complex)
    _balance(a)
    _hessenberg(a)
    return sort_spectrum(_hqr(a))


def eigenvector(A, lam: complex, iters: int = 3) -> np.ndarray:
    """Unit eigenvector for a known eigenvalue by inverse iteration."""
    M = np.asarray(A, dtype=complex)
    n = M.shape[0]
    scale = max(np.linalg.norm(M, np.inf), 1.0)
    shift = lam + 1e-10 * scale * (1 + 1j)
    S = M - shift * np.eye(n)
    v = np.ones(n, dtype=complex) / math.sqrt(n)
    for _ in range(iters):
        v = np.linalg.solve(S, v)
        v /= np.linalg.norm(v)
    return v


def is_hurwitz(A, margin: float = 0.0) -> bool:
    return bool(np.all(eigenvalues(A).real < -margin))


# ---------------------------------------------------------------- polynomials

def polynomial_roots(coeffs) -> np.ndarray:
    """Roots of a real polynomial (descending powers) via its companion matrix."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.size == 0 or not np.any(c):
        raise ValueError("zero polynomial has no well-defined roots")
    if c[0] == 0.0:
        raise ValueError("leading coefficient must be nonzero")
    if c.size < 2:
        raise ValueError("polynomial degree must be at least 1")
    c = c / c[0]
    # roots at the origin are split off exactly
    nz = 0
    while c.size > 1 and c[-1] == 0.0:
        c = c[:-1]
        nz += 1
    n = c.size - 1
    roots = np.zeros(nz, dtype=complex)
    if n > 0:
        comp = np.zeros((n, n))
        comp[0, :] = -c[1:]
        comp[1:, :-1] = np.eye(n - 1)
        roots = np.concatenate([roots, eigenvalues(comp)])
    return sort_spectrum(roots)


def poly_from_roots(roots) -> np.ndarray:
    p = np.array([1.0 + 0j])
    for r in roots:
        p = np.convolve(p, [1.0, -r])
    return p.real if np.allclose(p.imag, 0.0, atol=1e-12 * max(1.0, np.abs(p).max())) else p


# ---------------------------------------------------------------- Lyapunov / Riccati

def solve_lyapunov(A, Q) -> np.ndarray:
    """X with A^T X + X A + Q = 0 (Kronecker form, fine for n <= ~15)."""
    A = _as_matrix(A)
    Q = _as_matrix(Q)
    n = A.shape[0]
    I = np.eye(n)
    K = np.kron(I, A.T) + np.kron(A.T, I)
    x = np.linalg.solve(K, -Q.reshape(-1, order="F"))
    X = x.reshape((n, n), order="F")
    return 0.5 * (X + X.T)


def care_residual(A, B, Q, R, P) -> np.ndarray:
    Rinv = np.linalg.inv(R)
    return A.T @ P + P @ A - P @ B @ Rinv @ B.T @ P + Q


def care_tolerance(B, Q, R, P) -> float:
    """Contractual residual bound for :func:`solve_care`."""
    inf = lambda M: float(np.linalg.norm(M, np.inf))  # noqa: E731
    rmin = float(np.min(np.linalg.eigvalsh(0.5 * (R + R.T))))
    return 1e-7 * (inf(Q) + inf(P) ** 2 * inf(B) ** 2 / rmin)


def solve_care(A, B, Q, R, newton_steps: int = 8) -> np.ndarray:
    """Stabilizing solution of A^T P + P A - P B R^-1 B^T P + Q = 0.

    The Riccati differential equation is integrated from P = Q until it
    stalls, then Newton-Kleinman steps polish the result.
    """
    A = _as_matrix(A)
    B = _as_matrix(B)
    Q = _as_matrix(Q)
    R = _as_matrix(R)
    n = A.shape[0]
    if np.any(np.linalg.eigvalsh(0.5 * (R + R.T)) <= 0):
        raise DesignFailure("R must be symmetric positive definite")
    Q = 0.5 * (Q + Q.T)
    S = B @ np.linalg.solve(R, B.T)

    def rde(_t, p):
        P = p.reshape(n, n)
        return (A.T @ P + P @ A - P @ S @ P + Q).reshape(-1)

    P = Q.copy()
    horizon = 1.0
    for _ in range(40):
        res = ode.integrate(rde, P.reshape(-1), [0.0, horizon], method="rk45", rtol=1e-10, atol=1e-12)
        if not res.success:
            raise DesignFailure(f"Riccati flow diverged: {res.message}")
        P = res.y[-1].reshape(n, n)
        P = 0.5 * (P + P.T)
        rate = np.linalg.norm(rde(0.0, P.reshape(-1)), np.inf)
        if rate <= 1e-8 * max(1.0, np.linalg.norm(P, np.inf)):
            break
        horizon *= 2.0

    best = P
    best_res = np.linalg.norm(care_residual(A, B, Q, R, P), np.inf)
    for _ in range(newton_steps):
        K = np.linalg.solve(R, B.T @ P)
        Acl = A - B @ K
        try:
            Pn = solve_lyapunov(Acl, Q + K.T @ R @ K)
        except np.linalg.LinAlgError:
            break
        r = np.linalg.norm(care_residual(A, B, Q, R, Pn), np.inf)
        if not r < best_res:
            break
        best, best_res, P = Pn, r, Pn
        if r <= 1e-14 * max(1.0, np.linalg.norm(P, np.inf)):
            break
    P = best

    tol = care_tolerance(B, Q, R, P)
    if best_res > tol:
        raise DesignFailure(f"CARE residual {best_res:.3e} exceeds {tol:.3e}")
    K = np.linalg.solve(R, B.T @ P)
    ev = eigenvalues(A - B @ K)
    if not np.all(ev.real < 0):
        raise DesignFailure(f"CARE solution is not stabilizing; closed-loop spectrum {ev}")
    return P
