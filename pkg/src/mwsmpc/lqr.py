"""Infinite-horizon discrete LQR via Riccati value iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonConvergentError(RuntimeError):
    """Riccati iteration hit its cap; ``residual`` is the last update size."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(f"Riccati iteration did not converge after {iterations} "
                         f"iterations (last update {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class LqrDesign:
    """Feedback gain ``K`` (apply as ``u = K e``) and Riccati solution ``P``."""

    K: np.ndarray
    P: np.ndarray
    iterations: int = 0


def riccati_map(P, A, B, Q, R) -> np.ndarray:
    """One step of the discrete Riccati recursion."""
    BtPA = B.T @ P @ A
    return Q + A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA)


def dare_residual(P, A, B, Q, R) -> float:
    return float(np.max(np.abs(P - riccati_map(P, A, B, Q, R))))


def gain_from_riccati(P, A, B, R) -> np.ndarray:
    return -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)


def solve_dare(A, B, Q, R, tol: float = 1e-12, max_iter: int = 100_000) -> LqrDesign:
    """Solve the DARE by fixed-point iteration started at ``P = Q``.

    The returned gain already carries the minus sign, so ``A + B K`` is the
    closed-loop matrix.

    Raises
    ------
    NonConvergentError
        If ``max |P_{j+1} - P_j|`` stays above ``tol * max(1, max |P|)`` for
        ``max_iter`` iterations.
    """
    A = np.array(A, dtype=float, ndmin=2)
    B = np.array(B, dtype=float, ndmin=2)
    Q = np.array(Q, dtype=float, ndmin=2)
    R = np.array(R, dtype=float, ndmin=2)

    P = Q.copy()
    delta = np.inf
    for it in range(1, max_iter + 1):
        P_next = riccati_map(P, A, B, Q, R)
        P_next = 0.5 * (P_next + P_next.T)
        delta = float(np.max(np.abs(P_next - P)))
        P = P_next
        if delta <= tol * max(1.0, float(np.max(np.abs(P)))):
            break
    else:
        raise NonConvergentError(delta, max_iter)

    K = gain_from_riccati(P, A, B, R)
    P.setflags(write=False)
    K.setflags(write=False)
    return LqrDesign(K=K, P=P, iterations=it)
