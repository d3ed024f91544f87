"""Scenario sampling for the mission-wide chance constraint.

Sampled disturbance sequences turn the chance constraint into ``N_k`` copies of a
linear constraint that share the same decision-dependent term, so only the
row-wise maximum offset has to be kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import StackedPrediction
from .streams import make_stream


@dataclass(frozen=True, eq=False)
class ScenarioBatch:
    """``samples`` has shape (count, h*n): one stacked sequence ``[w_k, ..., w_{N-1}]`` per row."""

    samples: np.ndarray
    seed_lineage: tuple | None = None

    @property
    def count(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True, eq=False)
class ReducedConstraints:
    i_max: np.ndarray
    n_scenarios_used: int


def required_sample_count(s_k: float, beta: float, d_k: int) -> int:
    """Smallest ``N`` with ``N >= 2/(1-s_k) * (ln(1/beta) + d_k)``."""
    if not 0.0 <= s_k < 1.0:
        raise ValueError(f"risk bound must lie in [0, 1), got {s_k}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if d_k < 1:
        raise ValueError(f"d_k must be a positive integer, got {d_k}")
    bound = 2.0 / (1.0 - s_k) * (-math.log(beta) + d_k)
    n = math.ceil(bound)
    # guard against the bound landing a few ulps above an integer
    if n - 1 >= bound * (1.0 - 1e-12):
        n -= 1
    return int(n)


def psd_sqrt(sigma) -> np.ndarray:
    """Factor ``L`` with ``L @ L.T == sigma``; Cholesky when possible, else eigh."""
    sigma = np.asarray(sigma, dtype=float)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if vals.min(initial=0.0) < -1e-10:
        raise ValueError(f"covariance is indefinite (smallest eigenvalue {vals.min():.3e})")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def draw_scenarios(rng, sigma_w, h: int, count: int) -> ScenarioBatch:
    """Draw ``count`` i.i.d. stacked disturbance sequences of ``h`` steps.

    ``rng`` is either a :class:`numpy.random.Generator` or a lineage tuple from
    :func:`mwsmpc.streams.lineage`; only the latter is recorded on the batch.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    key = None
    if isinstance(rng, tuple):
        key, rng = rng, make_stream(rng)
    L = psd_sqrt(sigma_w)
    n = L.shape[0]
    z = rng.standard_normal((count * h, n))
    samples = (z @ L.T).reshape(count, h * n)
    samples.setflags(write=False)
    return ScenarioBatch(samples, key)


def build_h_rows(batch: ScenarioBatch, pred: StackedPrediction) -> np.ndarray:
    """Column ``i`` is ``c_blk @ a_err @ w_i + c_stack``; shape (h*n_c, count)."""
    w = batch.samples
    if w.shape[1] != pred.a_err.shape[1]:
        raise ValueError(f"samples have length {w.shape[1]}, prediction expects {pred.a_err.shape[1]}")
    ca = pred.c_blk @ pred.a_err
    return ca @ w.T + pred.c_stack[:, None]


def reduce_rowmax(h_rows) -> ReducedConstraints:
    h_rows = np.asarray(h_rows, dtype=float)
    if h_rows.ndim != 2 or h_rows.shape[1] == 0:
        raise ValueError("need at least one scenario column")
    i_max = h_rows.max(axis=1)
    i_max.setflags(write=False)
    return ReducedConstraints(i_max, h_rows.shape[1])
