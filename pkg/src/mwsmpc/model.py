"""Linear stochastic dynamics, polytopic safe sets and condensed prediction matrices.

The system is ``s+ = A s + B u + w`` with ``w ~ N(0, sigma_w)`` and the safe set is
``{s | C s + c <= 0}`` (boundary points count as safe).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, ndmin=ndim)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Discrete-time LTI system driven by zero-mean Gaussian noise.

    Parameters
    ----------
    A : (n, n) array
        State transition matrix.
    B : (n, m) array
        Input matrix.
    sigma_w : (n, n) array
        Covariance of the additive disturbance.
    """

    A: np.ndarray
    B: np.ndarray
    sigma_w: np.ndarray

    def __post_init__(self):
        A = _frozen(self.A, 2, "A")
        B = _frozen(self.B, 2, "B")
        sigma_w = _frozen(self.sigma_w, 2, "sigma_w")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        if sigma_w.shape != (n, n):
            raise ValueError(f"sigma_w must be {n}x{n}, got {sigma_w.shape}")
        if np.max(np.abs(sigma_w - sigma_w.T), initial=0.0) > 1e-12:
            raise ValueError("sigma_w must be symmetric")
        if np.min(np.linalg.eigvalsh(sigma_w)) < -1e-10:
            raise ValueError("sigma_w must be positive semidefinite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma_w", sigma_w)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class Polytope:
    """Closed polytope ``{s | C s + c <= 0}``."""

    C: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        C = _frozen(self.C, 2, "C")
        c = _frozen(self.c, 1, "c")
        if C.shape[0] != c.shape[0]:
            raise ValueError(f"C has {C.shape[0]} rows but c has length {c.shape[0]}")
        if np.any(np.all(C == 0.0, axis=1)):
            raise ValueError("C must not contain an all-zero row")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "c", c)

    @property
    def n_c(self) -> int:
        return self.C.shape[0]

    @property
    def n(self) -> int:
        return self.C.shape[1]

    def residuals(self, s) -> np.ndarray:
        """Return ``C s + c``; works row-wise on a batch of states."""
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != self.n:
            raise ValueError(f"state has dimension {s.shape[-1]}, polytope expects {self.n}")
        return s @ self.C.T + self.c

    def contains(self, s) -> np.ndarray | bool:
        """Vectorised membership test over the last axis of ``s``."""
        return np.all(self.residuals(s) <= 0.0, axis=-1)


@dataclass(frozen=True, eq=False)
class StackedPrediction:
    """Condensed predictions over a horizon of ``h`` steps.

    Stacked nominal states ``[s_{k+1}, ..., s_{k+h}] = phi @ s_k + gamma @ u``,
    stacked errors ``[e_{k+1}, ..., e_{k+h}] = a_err @ [w_k, ..., w_{k+h-1}]``.
    """

    phi: np.ndarray
    gamma: np.ndarray
    a_err: np.ndarray
    c_blk: np.ndarray
    c_stack: np.ndarray
    horizon: int


def in_safe_set(poly: Polytope, s) -> bool:
    s = np.asarray(s, dtype=float)
    if s.shape != (poly.n,):
        raise ValueError(f"expected a state of shape ({poly.n},), got {s.shape}")
    return bool(poly.contains(s))


def closed_loop_matrix(sys: LinearSystem, K) -> np.ndarray:
    """Return ``A + B K`` for the error feedback ``u = K e``."""
    K = np.array(K, dtype=float, ndmin=2)
    if K.shape != (sys.m, sys.n):
        raise ValueError(f"K must be {sys.m}x{sys.n}, got {K.shape}")
    return sys.A + sys.B @ K


def nominal_rollout(sys: LinearSystem, s_k, u_bar) -> np.ndarray:
    """Propagate the noise-free dynamics; returns states ``s_{k+1..k+h}`` as (h, n)."""
    s = np.asarray(s_k, dtype=float)
    if s.shape != (sys.n,):
        raise ValueError(f"expected a state of shape ({sys.n},), got {s.shape}")
    u_bar = np.asarray(u_bar, dtype=float).reshape(-1, sys.m)
    out = np.empty((u_bar.shape[0], sys.n))
    for t, u in enumerate(u_bar):
        s = sys.A @ s + sys.B @ u
        out[t] = s
    return out


def build_stacked_prediction(sys: LinearSystem, K, poly: Polytope, h: int) -> StackedPrediction:
    if h < 1:
        raise ValueError(f"horizon must be at least 1, got {h}")
    if poly.n != sys.n:
        raise ValueError("polytope and system state dimensions differ")
    n, m = sys.n, sys.m
    a_cl = closed_loop_matrix(sys, K)

    a_pows = [np.eye(n)]
    cl_pows = [np.eye(n)]
    for _ in range(h):
        a_pows.append(a_pows[-1] @ sys.A)
        cl_pows.append(cl_pows[-1] @ a_cl)

    phi = np.vstack(a_pows[1:h + 1])
    gamma = np.zeros((h * n, h * m))
    a_err = np.zeros((h * n, h * n))
    for j in range(h):
        for i in range(j + 1):
            gamma[j * n:(j + 1) * n, i * m:(i + 1) * m] = a_pows[j - i] @ sys.B
            a_err[j * n:(j + 1) * n, i * n:(i + 1) * n] = cl_pows[j - i]
    c_blk = np.kron(np.eye(h), poly.C)
    c_stack = np.tile(poly.c, h)
    for arr in (phi, gamma, a_err, c_blk, c_stack):
        arr.setflags(write=False)
    return StackedPrediction(phi, gamma, a_err, c_blk, c_stack, h)
