"""Monte Carlo evaluation of stored affine policies and stage-wise bound helpers."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .model import LinearSystem, Polytope, nominal_rollout
from .scenario import psd_sqrt
from .streams import make_stream

CONFIDENCE = 0.99


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    """Policy sequence ``u_t = u_bar[t-k] + k_gain (s_t - s_bar[t-k])`` for ``t = k..N-1``.

    ``s_bar`` holds the nominal states ``s_bar_k, ..., s_bar_N`` (h+1 rows).
    """

    base_step: int
    u_bar: np.ndarray
    k_gain: np.ndarray
    s_bar: np.ndarray

    def __post_init__(self):
        u_bar = np.array(self.u_bar, dtype=float, ndmin=2)
        k_gain = np.array(self.k_gain, dtype=float, ndmin=2)
        s_bar = np.array(self.s_bar, dtype=float, ndmin=2)
        if s_bar.shape[0] != u_bar.shape[0] + 1:
            raise ValueError("s_bar must hold one more state than u_bar has inputs")
        if k_gain.shape != (u_bar.shape[1], s_bar.shape[1]):
            raise ValueError(f"k_gain must be {u_bar.shape[1]}x{s_bar.shape[1]}")
        for name, val in (("u_bar", u_bar), ("k_gain", k_gain), ("s_bar", s_bar)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def from_inputs(cls, sys: LinearSystem, base_step: int, s_k, u_bar, k_gain):
        """Build the policy whose nominal trajectory starts at ``s_k``."""
        u_bar = np.asarray(u_bar, dtype=float).reshape(-1, sys.m)
        s_bar = np.vstack([np.asarray(s_k, dtype=float), nominal_rollout(sys, s_k, u_bar)])
        return cls(base_step, u_bar, k_gain, s_bar)

    @property
    def end_step(self) -> int:
        """Mission length ``N``."""
        return self.base_step + self.u_bar.shape[0]

    def __call__(self, t: int, s) -> np.ndarray:
        """Evaluate the policy at step ``t``; ``s`` may be a batch of states."""
        i = t - self.base_step
        if not 0 <= i < self.u_bar.shape[0]:
            raise IndexError(f"step {t} outside policy range [{self.base_step}, {self.end_step})")
        return self.u_bar[i] + (np.asarray(s) - self.s_bar[i]) @ self.k_gain.T

    def nominal_consistent(self, sys: LinearSystem, tol: float = 1e-12) -> bool:
        rolled = nominal_rollout(sys, self.s_bar[0], self.u_bar)
        return bool(np.max(np.abs(rolled - self.s_bar[1:])) <= tol * max(1.0, np.abs(self.s_bar).max()))


@dataclass(frozen=True)
class MwpsEstimate:
    p_hat: float
    n_samples: int
    n_safe: int
    lower_conf: float


def clopper_pearson_lower(n_safe: int, n: int, confidence: float = CONFIDENCE) -> float:
    """One-sided Clopper-Pearson lower confidence bound on a binomial proportion."""
    if n_safe == 0:
        return 0.0
    return float(stats.beta.ppf(1.0 - confidence, n_safe, n - n_safe + 1))


def estimate_remaining_mwps(sys: LinearSystem, poly: Polytope, policy: AffinePolicy, s_k,
                            n_samples: int, rng, step: int | None = None) -> MwpsEstimate:
    """Fraction of closed-loop rollouts from ``s_k`` at ``step`` keeping ``s_{step+1..N}`` safe.

    ``step`` defaults to the policy's base step. All disturbances for the batch are
    drawn up front as ``(steps, n_samples, n)`` standard normals.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if isinstance(rng, tuple):
        rng = make_stream(rng)
    k = policy.base_step if step is None else step
    if not policy.base_step <= k < policy.end_step:
        raise ValueError(f"step {k} outside policy range [{policy.base_step}, {policy.end_step})")

    L = psd_sqrt(sys.sigma_w)
    steps = policy.end_step - k
    w = (rng.standard_normal((steps * n_samples, sys.n)) @ L.T).reshape(steps, n_samples, sys.n)

    # With u = u_bar + K (s - s_bar) and a consistent nominal trajectory, the
    # deviation e = s - s_bar obeys e+ = (A + B K) e + w exactly.
    i0 = k - policy.base_step
    s_bar = policy.s_bar[i0:]
    a_cl_t = (sys.A + sys.B @ policy.k_gain).T
    e = np.asarray(s_k, dtype=float) - s_bar[0]
    e = np.broadcast_to(e, (n_samples, sys.n))
    c_t = poly.C.T
    safe = np.ones(n_samples, dtype=bool)
    for j in range(steps):
        e = e @ a_cl_t + w[j]
        offset = poly.C @ s_bar[j + 1] + poly.c
        safe &= np.all(e @ c_t <= -offset, axis=1)
    n_safe = int(safe.sum())
    return MwpsEstimate(n_safe / n_samples, n_samples, n_safe, clopper_pearson_lower(n_safe, n_samples))


def compute_sk(gamma_k: float, estimate: MwpsEstimate, cap: float, conservative: bool = False) -> float:
    """Discounted risk bound ``min(gamma_k * p, cap)``; ``p`` is the plug-in estimate
    unless ``conservative`` selects the Clopper-Pearson lower bound."""
    if not 0.0 < gamma_k <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma_k}")
    p = estimate.lower_conf if conservative else estimate.p_hat
    return min(gamma_k * p, cap)


def stage_bound(n_mission: int, s_target: float) -> float:
    """Per-stage safety level that certifies mission safety ``s_target`` through Boole's inequality."""
    if n_mission < 1:
        raise ValueError("n_mission must be at least 1")
    if not 0.0 <= s_target <= 1.0:
        raise ValueError(f"s_target must lie in [0, 1], got {s_target}")
    return (n_mission - 1) / n_mission + s_target / n_mission


def swps_surface(n_values, s_values) -> np.ndarray:
    n_values = list(n_values)
    s_values = list(s_values)
    if not n_values or not s_values:
        raise ValueError("need at least one N and one S value")
    return np.array([[stage_bound(n, s) for s in s_values] for n in n_values])


def write_surface_csv(path, n_values, s_values) -> None:
    grid = swps_surface(n_values, s_values)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["N", "S", "bound"])
        for i, n in enumerate(n_values):
            for j, s in enumerate(s_values):
                writer.writerow([int(n), f"{s:.6f}", f"{grid[i, j]:.6f}"])
