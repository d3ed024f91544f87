"""Shrinking-horizon scenario SMPC with a mission-wide safety guarantee.

At every step ``k`` the controller

1. estimates, for ``k >= 1``, how safe the rest of the mission would be under the
   previous policy and discounts it by ``gamma_k`` to get the risk bound ``S_k``;
2. draws ``N_k`` disturbance scenarios, enough for confidence ``1 - beta``;
3. solves the condensed QP over ``u_k, ..., u_{N-1}`` under the row-max scenario
   constraints, falling back to the previous policy if the QP fails;
4. applies the first input and advances the true plant.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .estimator import AffinePolicy, compute_sk, estimate_remaining_mwps
from .lqr import LqrDesign
from .model import LinearSystem, Polytope, build_stacked_prediction, in_safe_set
from .qp import QpStatus, assemble_qp, solve_qp
from .scenario import (ReducedConstraints, draw_scenarios, psd_sqrt, reduce_rowmax, required_sample_count,
                       build_h_rows)
from .streams import MONTE_CARLO, PLANT, SCENARIOS, lineage, make_stream

# constraint back-off above the QP feasibility tolerance, so nominal plans that
# touch the boundary do not leave the safe set through rounding
BACKOFF = 1e-9


class MissionConfigError(RuntimeError):
    """The mission cannot start, e.g. the first QP is infeasible."""


@dataclass(frozen=True, eq=False)
class MissionSpec:
    n_mission: int
    s0_bound: float
    gammas: tuple
    beta: float
    q_cost: np.ndarray
    r_cost: np.ndarray
    sk_cap: float = 0.995
    mc_samples: int = 10_000
    seed: int = 0
    conservative_sk: bool = False

    def __post_init__(self):
        gammas = tuple(float(g) for g in np.atleast_1d(self.gammas))
        if len(gammas) == 1 and self.n_mission > 2:
            gammas = gammas * (self.n_mission - 1)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "q_cost", np.array(self.q_cost, dtype=float, ndmin=2))
        object.__setattr__(self, "r_cost", np.array(self.r_cost, dtype=float, ndmin=2))
        if self.n_mission < 1:
            raise ValueError("n_mission must be at least 1")
        if len(gammas) != self.n_mission - 1:
            raise ValueError(f"need {self.n_mission - 1} gammas, got {len(gammas)}")
        if any(not 0.0 < g <= 1.0 for g in gammas):
            raise ValueError("gammas must lie in (0, 1]")
        for name in ("s0_bound", "sk_cap"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.sk_cap >= 1.0:
            raise ValueError("sk_cap must be below 1 to keep the scenario count finite")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be positive")

    @property
    def certified_bound(self) -> float:
        """Mission-wide guarantee ``S_0 * prod(gamma_k)``."""
        return self.s0_bound * math.prod(self.gammas)


@dataclass
class StepDiagnostics:
    k: int
    s_k_bound: float
    n_scenarios: int
    decision_dim: int
    status: QpStatus
    fallback: bool
    p_hat: float = np.nan
    lower_conf: float = np.nan
    kkt_stationarity: float = np.nan
    kkt_complementarity: float = np.nan
    primal_violation: float = np.nan


@dataclass
class MissionTrace:
    """Record of one mission.

    ``sk_values[0]`` is ``S_0``; entries ``1..N-1`` are the estimated bounds.
    """

    states: np.ndarray
    inputs: np.ndarray
    sk_values: np.ndarray
    nk_values: np.ndarray
    qp_statuses: list
    fallback_flags: np.ndarray
    success: bool
    first_violation: int | None = None
    steps: list = field(default_factory=list)


class Planner:
    """Per-step policy synthesis for one system, safe set and mission spec."""

    def __init__(self, spec: MissionSpec, sys: LinearSystem, poly: Polytope, design: LqrDesign):
        if poly.n != sys.n:
            raise ValueError("polytope and system state dimensions differ")
        self.spec = spec
        self.sys = sys
        self.poly = poly
        self.design = design
        self._preds = {}

    def prediction(self, h: int):
        if h not in self._preds:
            self._preds[h] = build_stacked_prediction(self.sys, self.design.K, self.poly, h)
        return self._preds[h]

    def risk_bound(self, k, s_k, prev, mission=0):
        """``S_k`` and the Monte Carlo estimate it came from (``None`` at ``k = 0``)."""
        spec = self.spec
        if k == 0:
            return spec.s0_bound, None
        est = estimate_remaining_mwps(self.sys, self.poly, prev, s_k, spec.mc_samples,
                                      lineage(spec.seed, mission, k, MONTE_CARLO), step=k)
        return compute_sk(spec.gammas[k - 1], est, spec.sk_cap, spec.conservative_sk), est

    def plan_step(self, k: int, s_k, prev: AffinePolicy | None, mission: int = 0):
        spec, sys = self.spec, self.sys
        N = spec.n_mission
        if not 0 <= k < N:
            raise ValueError(f"step {k} outside [0, {N})")
        if k >= 1 and prev is None:
            raise ValueError("a previous policy is required for k >= 1")
        s_k = np.asarray(s_k, dtype=float)

        h = N - k
        d_k = sys.m * h
        sk, est = self.risk_bound(k, s_k, prev, mission)
        n_k = required_sample_count(sk, spec.beta, d_k)
        pred = self.prediction(h)
        batch = draw_scenarios(lineage(spec.seed, mission, k, SCENARIOS), sys.sigma_w, h, n_k)
        red = reduce_rowmax(build_h_rows(batch, pred))
        red = ReducedConstraints(red.i_max + BACKOFF, red.n_scenarios_used)
        prob = assemble_qp(sys, spec.q_cost, spec.r_cost, self.design.P, pred, s_k, red)
        sol = solve_qp(prob)

        diag = StepDiagnostics(k, sk, n_k, d_k, sol.status, not sol.ok,
                               kkt_stationarity=sol.kkt_stationarity,
                               kkt_complementarity=sol.kkt_complementarity,
                               primal_violation=sol.primal_violation)
        if est is not None:
            diag.p_hat, diag.lower_conf = est.p_hat, est.lower_conf
        if sol.ok:
            return AffinePolicy.from_inputs(sys, k, s_k, sol.x, self.design.K), diag
        if prev is None:
            raise MissionConfigError(f"initial QP is {sol.status}; the mission cannot start")
        return prev, diag

    def run_mission(self, s_0, mission: int = 0) -> MissionTrace:
        spec, sys, poly = self.spec, self.sys, self.poly
        N = spec.n_mission
        s = np.asarray(s_0, dtype=float)
        if not in_safe_set(poly, s):
            raise ValueError("initial state is outside the safe set")
        L = psd_sqrt(sys.sigma_w)

        states = np.empty((N + 1, sys.n))
        inputs = np.empty((N, sys.m))
        states[0] = s
        steps = []
        policy = None
        for k in range(N):
            policy, diag = self.plan_step(k, s, policy, mission)
            u = policy(k, s)
            w = L @ make_stream(lineage(spec.seed, mission, k, PLANT)).standard_normal(sys.n)
            s = sys.A @ s + sys.B @ u + w
            inputs[k] = u
            states[k + 1] = s
            steps.append(diag)

        safe = poly.contains(states[1:])
        bad = np.nonzero(~safe)[0]
        return MissionTrace(
            states=states,
            inputs=inputs,
            sk_values=np.array([d.s_k_bound for d in steps]),
            nk_values=np.array([d.n_scenarios for d in steps]),
            qp_statuses=[d.status for d in steps],
            fallback_flags=np.array([d.fallback for d in steps]),
            success=bool(safe.all()),
            first_violation=int(bad[0]) + 1 if bad.size else None,
            steps=steps,
        )


def plan_step(k, s_k, prev, spec, sys, poly, design, mission=0):
    return Planner(spec, sys, poly, design).plan_step(k, s_k, prev, mission)


def run_mission(spec, sys, poly, design, s_0, mission=0) -> MissionTrace:
    return Planner(spec, sys, poly, design).run_mission(s_0, mission)


@dataclass
class BatchResult:
    missions: int
    successes: int
    s_certified: float
    mean_sk: np.ndarray
    mean_nk: np.ndarray
    fallback_counts: np.ndarray
    status_counts: dict
    max_stationarity: float
    max_complementarity: float
    max_violation: float
    traces: list | None = None

    @property
    def ratio(self) -> float:
        return self.successes / self.missions


def _run_chunk(args):
    spec, sys, poly, design, s_0, indices = args
    planner = Planner(spec, sys, poly, design)
    return [planner.run_mission(s_0, i) for i in indices]


def run_batch(spec, sys, poly, design, s_0, n_missions: int, master_seed: int | None = None,
              workers: int = 1, keep_traces: bool = False, trace_dir=None) -> BatchResult:
    """Run independent missions; mission ``i`` draws from streams keyed by ``(seed, i)``."""
    if n_missions < 1:
        raise ValueError("n_missions must be at least 1")
    if master_seed is not None:
        spec = replace(spec, seed=master_seed)
    N = spec.n_mission

    if workers > 1:
        chunks = np.array_split(np.arange(n_missions), workers * 4)
        jobs = [(spec, sys, poly, design, s_0, c.tolist()) for c in chunks if c.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = [t for part in pool.map(_run_chunk, jobs) for t in part]
    else:
        traces = _run_chunk((spec, sys, poly, design, s_0, range(n_missions)))

    sk = np.array([t.sk_values for t in traces])
    nk = np.array([t.nk_values for t in traces])
    fb = np.array([t.fallback_flags for t in traces])
    status_counts = {str(s): 0 for s in QpStatus}
    stat = comp = viol = 0.0
    for t in traces:
        for d in t.steps:
            status_counts[str(d.status)] += 1
            if d.status is QpStatus.OPTIMAL:
                stat = max(stat, d.kkt_stationarity)
                comp = max(comp, d.kkt_complementarity)
                viol = max(viol, d.primal_violation)

    if trace_dir is not None:
        os.makedirs(trace_dir, exist_ok=True)
        width = len(str(n_missions - 1))
        for i, t in enumerate(traces):
            write_trace_csv(os.path.join(trace_dir, f"mission_{i:0{width}d}.csv"), t, poly)

    return BatchResult(
        missions=n_missions,
        successes=sum(t.success for t in traces),
        s_certified=spec.certified_bound,
        mean_sk=sk[:, 1:].mean(axis=0) if N > 1 else np.zeros(0),
        mean_nk=nk.mean(axis=0),
        fallback_counts=fb.sum(axis=0),
        status_counts=status_counts,
        max_stationarity=stat,
        max_complementarity=comp,
        max_violation=viol,
        traces=traces if keep_traces else None,
    )


def _fmt(x) -> str:
    return format(float(x), ".12g")


def write_trace_csv(path, trace: MissionTrace, poly: Polytope) -> None:
    """One row per step ``k = 0..N``; the final row carries only the terminal state."""
    n = trace.states.shape[1]
    m = trace.inputs.shape[1]
    N = trace.inputs.shape[0]
    header = (["k"] + [f"s{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
              + ["Sk", "Nk", "qp_status", "fallback", "safe"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(N + 1):
            row = [k] + [_fmt(v) for v in trace.states[k]]
            if k < N:
                row += [_fmt(v) for v in trace.inputs[k]]
                row += [_fmt(trace.sk_values[k]), int(trace.nk_values[k]), str(trace.qp_statuses[k]),
                        int(trace.fallback_flags[k])]
            else:
                row += [""] * (m + 4)
            row.append(int(poly.contains(trace.states[k])))
            writer.writerow(row)


def write_summary_csv(path, result: BatchResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["missions", "successes", "ratio", "S_certified"])
        writer.writerow([result.missions, result.successes, f"{result.ratio:.6f}",
                         f"{result.s_certified:.6f}"])


def write_steps_csv(path, result: BatchResult) -> None:
    """Per-step averages; ``mean_Sk`` is left empty at ``k = 0``, where no estimate is made."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "mean_Sk", "mean_Nk", "fallbacks"])
        for k in range(result.mean_nk.shape[0]):
            sk = result.mean_sk[k - 1] if k else np.nan
            writer.writerow([k, "" if k == 0 else f"{sk:.6f}", f"{result.mean_nk[k]:.3f}",
                             int(result.fallback_counts[k])])
