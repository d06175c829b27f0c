"""Quadratic Lyapunov functions for linear modes.

Solves AᵀP + PA = -Q for symmetric P by vectorizing over the
n(n+1)/2 upper-triangular unknowns and running Gaussian elimination with
partial pivoting.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .certificates import NoCertificate, QuadraticCertificate

RESIDUAL_TOL = 1e-9


def _sym_index(n: int) -> dict[tuple[int, int], int]:
    idx, k = {}, 0
    for i in range(n):
        for j in range(i, n):
            idx[(i, j)] = k
            k += 1
    return idx


def lyapunov_system(A: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
    """Linear system M p = b whose solution holds the upper triangle of P."""
    n = A.shape[0]
    idx = _sym_index(n)

    def u(i, j):
        return idx[(i, j) if i <= j else (j, i)]

    m = len(idx)
    M = np.zeros((m, m))
    b = np.zeros(m)
    for (k, l), row in idx.items():
        # (AᵀP + PA)_{kl} = sum_m A_mk P_ml + sum_m P_km A_ml
        for mm in range(n):
            M[row, u(mm, l)] += A[mm, k]
            M[row, u(k, mm)] += A[mm, l]
        b[row] = -Q[k, l]
    return M, b, idx


def gauss_solve(M: np.ndarray, b: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Gaussian elimination with partial pivoting; raises on a singular system."""
    M = np.array(M, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    scale = max(np.max(np.abs(M)), 1.0)
    for c in range(n):
        p = c + int(np.argmax(np.abs(M[c:, c])))
        if abs(M[p, c]) <= tol * scale:
            raise NoCertificate("singular Lyapunov system")
        if p != c:
            M[[c, p]] = M[[p, c]]
            b[[c, p]] = b[[p, c]]
        f = M[c + 1:, c] / M[c, c]
        M[c + 1:, c:] -= np.outer(f, M[c, c:])
        b[c + 1:] -= f * b[c]
    x = np.zeros(n)
    for r in range(n - 1, -1, -1):
        x[r] = (b[r] - M[r, r + 1:] @ x[r + 1:]) / M[r, r]
    return x


def solve_lyapunov_linear(
    A: Sequence[Sequence[float]],
    Q: Optional[Sequence[Sequence[float]]] = None,
    vars: Optional[Sequence[str]] = None,
    guard=None,
    provenance: Optional[dict] = None,
) -> QuadraticCertificate:
    """Return P with AᵀP + PA = -Q as a certificate with the level unset."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12:
        raise ValueError("Q must be symmetric")
    M, b, idx = lyapunov_system(A, Q)
    sol = gauss_solve(M, b)
    P = np.zeros((n, n))
    for (i, j), k in idx.items():
        P[i, j] = P[j, i] = sol[k]
    res = lyapunov_residual(A, P, Q)
    if not res <= RESIDUAL_TOL:
        raise NoCertificate(f"Lyapunov residual {res:.3g} exceeds tolerance")
    names = tuple(vars) if vars is not None else tuple(f"x{i + 1}" for i in range(n))
    prov = {"Q": "identity" if np.array_equal(Q, np.eye(n)) else "custom", "residual": res}
    prov.update(provenance or {})
    return QuadraticCertificate(tuple(map(tuple, P)), names, None, guard, provenance=prov)


def lyapunov_residual(A, P, Q) -> float:
    A, P, Q = (np.asarray(v, dtype=float) for v in (A, P, Q))
    return float(np.max(np.abs(A.T @ P + P @ A + Q)))
