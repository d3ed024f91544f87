"""Exact safety probabilities on small finite Markov chains.

These are reference computations for the mission-safety results used by the
controller: conservation of the remaining mission safety, the discounted policy
update bound, and the Boole lower bound. Backward dynamic programming is checked
against brute-force path enumeration.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_STATES = 10
MAX_HORIZON = 10
ROW_TOL = 1e-12


class HarnessError(ValueError):
    """A constructed instance violates the assumptions of the check it was fed to."""


@dataclass(frozen=True, eq=False)
class DiscreteChain:
    """Time-varying chain: ``transition[t][s, s2]`` is the probability of ``s -> s2`` at step ``t``."""

    transition: np.ndarray
    safe_mask: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        if P.ndim == 2:
            raise ValueError("transition must be a stack of per-step matrices")
        safe = np.array(self.safe_mask, dtype=bool)
        N, n, n2 = P.shape
        if n != n2 or safe.shape != (n,):
            raise ValueError("inconsistent chain dimensions")
        if n > MAX_STATES or N > MAX_HORIZON:
            raise ValueError(f"oracle chains are limited to {MAX_STATES} states and horizon {MAX_HORIZON}")
        check_stochastic(P)
        P.setflags(write=False)
        safe.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "safe_mask", safe)

    @property
    def n_states(self) -> int:
        return self.transition.shape[1]

    @property
    def horizon(self) -> int:
        return self.transition.shape[0]

    @classmethod
    def stationary(cls, P, safe_mask, horizon: int):
        return cls(np.repeat(np.asarray(P, dtype=float)[None], horizon, axis=0), safe_mask)


def check_stochastic(P) -> None:
    P = np.asarray(P)
    if np.any(P < 0.0):
        raise ValueError("transition probabilities must be non-negative")
    if np.max(np.abs(P.sum(axis=-1) - 1.0)) > ROW_TOL:
        raise ValueError("transition rows must sum to one")


def survival_values(transition, safe_mask, from_step: int = 0) -> np.ndarray:
    """``V[t - from_step, s]``: probability that states ``t+1..N`` are safe given ``s_t = s``.

    The last row (``t = N``) is all ones.
    """
    P = np.asarray(transition)
    N, n, _ = P.shape
    V = np.ones((N - from_step + 1, n))
    safe = np.asarray(safe_mask, dtype=float)
    for t in range(N - 1, from_step - 1, -1):
        V[t - from_step] = P[t] @ (safe * V[t - from_step + 1])
    return V


def exact_mwps(chain: DiscreteChain, s0: int, from_step: int = 0) -> float:
    """Probability that every state after ``from_step`` up to ``N`` is safe, starting from ``s0``."""
    if not 0 <= s0 < chain.n_states:
        raise ValueError(f"invalid state {s0}")
    if not 0 <= from_step < chain.horizon:
        raise ValueError(f"from_step must lie in [0, {chain.horizon})")
    return float(survival_values(chain.transition, chain.safe_mask, from_step)[0, s0])


@functools.lru_cache(maxsize=256)
def _paths(n: int, length: int) -> np.ndarray:
    """Every sequence in ``range(n) ** length``, one per row."""
    if length == 0:
        return np.zeros((1, 0), dtype=int)
    paths = np.array(list(itertools.product(range(n), repeat=length)), dtype=int)
    paths.setflags(write=False)
    return paths


def _safe_prefix_weights(transition, safe_mask, s0: int, start: int, length: int):
    """All safe paths of ``length`` steps from ``s0`` at ``start`` and their probabilities."""
    P = np.asarray(transition)
    paths = _paths(P.shape[1], length)
    prev = np.full(paths.shape[0], s0)
    prob = np.ones(paths.shape[0])
    for j in range(length):
        cur = paths[:, j]
        prob = prob * P[start + j][prev, cur] * safe_mask[cur]
        prev = cur
    return paths, prob


def enumerate_mwps(chain: DiscreteChain, s0: int, from_step: int = 0) -> float:
    """Brute-force sum of probabilities over every safe path to the horizon."""
    _, prob = _safe_prefix_weights(chain.transition, chain.safe_mask, s0, from_step,
                                   chain.horizon - from_step)
    return float(prob.sum())


def check_lemma1(chain: DiscreteChain, s0: int, k: int) -> tuple[float, float]:
    """Whole-mission safety versus the survivor-weighted remaining safety at step ``k``.

    ``rhs`` sums, over every safe prefix ``s_1..s_k``, the prefix probability times
    the exact remaining safety from ``s_k``. The two sides are equal.
    """
    if not 1 <= k <= chain.horizon - 1:
        raise ValueError(f"k must lie in [1, {chain.horizon - 1}]")
    lhs = exact_mwps(chain, s0, 0)
    paths, prob = _safe_prefix_weights(chain.transition, chain.safe_mask, s0, 0, k)
    remaining = survival_values(chain.transition, chain.safe_mask, k)[0]
    rhs = float(prob @ remaining[paths[:, -1]])
    return lhs, rhs


def closed_loop_transitions(policies) -> np.ndarray:
    """Transitions applied when policy sequence ``k`` supplies only its step-``k`` action."""
    return np.array([np.asarray(policies[t])[t] for t in range(len(policies))])


def check_prop1(policies, safe_mask, gammas, s0: int, s0_bound: float | None = None,
                tol: float = 1e-12) -> tuple[float, float]:
    """Closed-loop mission safety under re-planned policies versus ``S_0 * prod(gamma)``.

    ``policies[k]`` is a full stack of ``N`` transition matrices for policy
    sequence ``k`` (only steps ``k..N-1`` matter). Each sequence must keep, from
    every safe state at step ``k``, at least ``gammas[k-1]`` times the remaining
    safety of its predecessor; otherwise :class:`HarnessError` is raised.
    """
    P = np.asarray(policies, dtype=float)
    N = P.shape[0]
    if P.shape[1] != N:
        raise ValueError("each policy sequence must cover the whole mission")
    safe = np.asarray(safe_mask, dtype=bool)
    gammas = list(gammas)
    if len(gammas) != N - 1:
        raise ValueError(f"need {N - 1} discount factors")
    for k in range(N):
        check_stochastic(P[k][k:])

    v0 = survival_values(P[0], safe, 0)[0, s0]
    if s0_bound is None:
        s0_bound = v0
    elif v0 < s0_bound - tol:
        raise HarnessError(f"initial policy reaches {v0:.6g} < S_0 = {s0_bound:.6g}")

    for k in range(1, N):
        new = survival_values(P[k], safe, k)[0]
        old = survival_values(P[k - 1], safe, k)[0]
        short = (new < gammas[k - 1] * old - tol) & safe
        if np.any(short):
            raise HarnessError(f"policy {k} breaks the discounted update constraint "
                               f"in states {np.nonzero(short)[0].tolist()}")

    mwps = float(survival_values(closed_loop_transitions(P), safe, 0)[0, s0])
    return mwps, s0_bound * math.prod(gammas)


def stage_probabilities(chain: DiscreteChain, s0: int) -> np.ndarray:
    """Unconditional ``P[s_k safe]`` for ``k = 1..N``."""
    dist = np.zeros(chain.n_states)
    dist[s0] = 1.0
    out = np.empty(chain.horizon)
    for t in range(chain.horizon):
        dist = dist @ chain.transition[t]
        out[t] = dist[chain.safe_mask].sum()
    return out


def check_boole(chain: DiscreteChain, s0: int) -> tuple[float, float]:
    """Mission safety and its Boole lower bound ``1 - N + sum_k P[s_k safe]``."""
    mwps = exact_mwps(chain, s0, 0)
    return mwps, float(1.0 - chain.horizon + stage_probabilities(chain, s0).sum())


# -- random instance generators used by tests, demos and the CLI --

def random_stochastic(rng, shape) -> np.ndarray:
    """Random row-stochastic matrices with some exact zeros, rows summing to 1 within 1e-15."""
    raw = rng.exponential(size=shape) * (rng.random(shape) < 0.8)
    raw[..., 0] += (raw.sum(axis=-1) == 0)
    P = raw / raw.sum(axis=-1, keepdims=True)
    # put the rounding remainder on the largest entry
    idx = P.argmax(axis=-1)
    rem = 1.0 - P.sum(axis=-1)
    np.put_along_axis(P, idx[..., None], np.take_along_axis(P, idx[..., None], -1) + rem[..., None], -1)
    return P


def random_chain(rng, max_states: int = 6, max_horizon: int = 6) -> DiscreteChain:
    n = int(rng.integers(2, max_states + 1))
    N = int(rng.integers(2, max_horizon + 1))
    safe = rng.random(n) < 0.7
    safe[0] = True
    return DiscreteChain(random_stochastic(rng, (N, n, n)), safe)


def random_policy_switches(rng, chain: DiscreteChain, gammas, adversarial: bool = False) -> np.ndarray:
    """Build policy sequences ``0..N-1`` that satisfy the discounted update rule.

    Sequence ``k`` blends its predecessor with a candidate on steps ``k..N-1``.
    Random candidates take the first weight in 1, 1/2, 1/4, ... that keeps the
    rule. Adversarial candidates drive every state towards the least safe state
    and the weight is bisected so the rule is nearly binding. Weight zero (keep
    the predecessor) always qualifies.
    """
    N = chain.horizon
    safe = chain.safe_mask
    seqs = [chain.transition.copy()]
    for k in range(1, N):
        prev = seqs[-1]
        old = survival_values(prev, safe, k)[0]
        g = gammas[k - 1]
        if adversarial:
            cand = np.zeros_like(prev[k:])
            for j, t in enumerate(range(k, N)):
                worth = safe * survival_values(prev, safe, t + 1)[0] if t + 1 < N else safe * 1.0
                cand[j, :, int(np.argmin(worth))] = 1.0
        else:
            cand = random_stochastic(rng, prev[k:].shape)

        def blend(lam):
            mix = prev.copy()
            mix[k:] = (1.0 - lam) * prev[k:] + lam * cand
            new = survival_values(mix, safe, k)[0]
            return bool(np.all((new >= g * old) | ~safe)), mix

        chosen = prev.copy()
        if adversarial:
            lo, hi = 0.0, 1.0
            good, mix = blend(hi)
            if good:
                chosen = mix
            else:
                for _ in range(50):
                    mid = 0.5 * (lo + hi)
                    good, mix = blend(mid)
                    if good:
                        lo, chosen = mid, mix
                    else:
                        hi = mid
        else:
            for lam in 0.5 ** np.arange(12):
                good, mix = blend(lam)
                if good:
                    chosen = mix
                    break
        seqs.append(chosen)
    return np.array(seqs)
