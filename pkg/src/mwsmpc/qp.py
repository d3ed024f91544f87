"""Dense convex QP: condensed MPC assembly and a dual active-set solver.

Problems are stated as::

    minimize    0.5 x' hess x + lin' x
    subject to  g_ineq x + h_ineq <= 0

The solver is the Goldfarb-Idnani dual method: it starts at the unconstrained
minimiser and adds violated constraints one at a time while keeping the
multipliers dual feasible. Infeasibility claims are confirmed with a phase-1 LP.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, block_diag
from scipy.optimize import linprog

from .model import LinearSystem, StackedPrediction
from .scenario import ReducedConstraints

REG_FLOOR = 1e-10
INFEASIBLE_RESIDUAL = 1e-8


class QpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class QpProblem:
    hess: np.ndarray
    lin: np.ndarray
    g_ineq: np.ndarray
    h_ineq: np.ndarray

    def __post_init__(self):
        hess = np.array(self.hess, dtype=float, ndmin=2)
        lin = np.array(self.lin, dtype=float, ndmin=1)
        d = lin.shape[0]
        g = np.array(self.g_ineq, dtype=float).reshape(-1, d)
        h = np.array(self.h_ineq, dtype=float).reshape(-1)
        if hess.shape != (d, d):
            raise ValueError(f"hess must be {d}x{d}, got {hess.shape}")
        if g.shape[0] != h.shape[0]:
            raise ValueError("g_ineq and h_ineq disagree on the number of constraints")
        if np.max(np.abs(hess - hess.T), initial=0.0) > 1e-12 * max(1.0, np.abs(hess).max(initial=0.0)):
            raise ValueError("hess must be symmetric")
        if np.min(np.linalg.eigvalsh(hess)) < -1e-10:
            raise ValueError("hess must be positive semidefinite")
        for name, val in (("hess", hess), ("lin", lin), ("g_ineq", g), ("h_ineq", h)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.lin.shape[0]

    @property
    def n_ineq(self) -> int:
        return self.h_ineq.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.hess @ x + self.lin @ x)


@dataclass(frozen=True, eq=False)
class QpSolution:
    x: np.ndarray
    duals: np.ndarray
    status: QpStatus
    kkt_stationarity: float = np.nan
    kkt_complementarity: float = np.nan
    primal_violation: float = np.nan
    iterations: int = 0
    active: tuple = field(default=())
    phase1_residual: float | None = None

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def assemble_qp(sys: LinearSystem, q_cost, r_cost, q_term, pred: StackedPrediction, s_k,
                red: ReducedConstraints | None) -> QpProblem:
    """Condense the shrinking-horizon MPC problem over ``u = [u_k, ..., u_{N-1}]``.

    The stage cost of the fixed current state and the variance constant are dropped.
    Rows of ``red`` equal to ``-inf`` are vacuous and left out; ``red=None`` means
    no constraints.
    """
    n, m, h = sys.n, sys.m, pred.horizon
    q_cost = np.array(q_cost, dtype=float, ndmin=2)
    r_cost = np.array(r_cost, dtype=float, ndmin=2)
    q_term = np.array(q_term, dtype=float, ndmin=2)
    if q_cost.shape != (n, n) or q_term.shape != (n, n) or r_cost.shape != (m, m):
        raise ValueError("cost matrices do not match the system dimensions")
    s_k = np.asarray(s_k, dtype=float)
    if s_k.shape != (n,):
        raise ValueError(f"expected a state of shape ({n},), got {s_k.shape}")
    if pred.phi.shape != (h * n, n) or pred.gamma.shape != (h * n, h * m):
        raise ValueError("prediction matrices do not match the system dimensions")

    q_bar = block_diag(*([q_cost] * (h - 1) + [q_term]))
    r_bar = block_diag(*([r_cost] * h))
    gq = pred.gamma.T @ q_bar
    hess = 2.0 * (gq @ pred.gamma + r_bar)
    hess = 0.5 * (hess + hess.T)
    lin = 2.0 * gq @ (pred.phi @ s_k)

    if red is None:
        g = np.zeros((0, h * m))
        hv = np.zeros(0)
    else:
        i_max = np.asarray(red.i_max, dtype=float)
        if i_max.shape != (pred.c_blk.shape[0],):
            raise ValueError(f"reduced constraints have length {i_max.shape[0]}, "
                             f"expected {pred.c_blk.shape[0]}")
        keep = np.isfinite(i_max)
        g = (pred.c_blk @ pred.gamma)[keep]
        hv = (i_max + pred.c_blk @ (pred.phi @ s_k))[keep]
    return QpProblem(hess, lin, g, hv)


def kkt_residuals(prob: QpProblem, x, duals) -> tuple[float, float, float]:
    """Stationarity, complementarity and primal violation (all infinity norms)."""
    slack = prob.g_ineq @ x + prob.h_ineq
    grad = prob.hess @ x + prob.lin + prob.g_ineq.T @ duals
    stat = float(np.max(np.abs(grad), initial=0.0))
    comp = float(np.max(np.abs(duals * slack), initial=0.0))
    viol = float(max(0.0, np.max(slack, initial=0.0)))
    return stat, comp, viol


def phase1_residual(g, h) -> float:
    """Smallest achievable ``max_i (g_i x + h_i)^+`` over ``x`` (an LP)."""
    p, d = g.shape
    if p == 0:
        return 0.0
    cost = np.zeros(d + 1)
    cost[-1] = 1.0
    a_ub = np.hstack([g, -np.ones((p, 1))])
    bounds = [(None, None)] * d + [(0.0, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=-h, bounds=bounds, method="highs")
    if res.status != 0:
        return np.inf
    return float(res.x[-1])


def _regularised_factor(hess):
    lam_min = np.linalg.eigvalsh(hess).min()
    if lam_min < REG_FLOOR:
        hess = hess + (REG_FLOOR - min(lam_min, 0.0)) * np.eye(hess.shape[0])
    return cho_factor(hess, lower=True), hess


def _polish(hess, prob, active, x, u):
    """Re-solve the equality-constrained KKT system on the final active set."""
    d = prob.dim
    ga = prob.g_ineq[active]
    q = len(active)
    kkt = np.block([[hess, ga.T], [ga, np.zeros((q, q))]])
    rhs = np.concatenate([-prob.lin, -prob.h_ineq[active]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return x, u
    if not np.all(np.isfinite(sol)) or np.any(sol[d:] < -1e-12):
        return x, u
    return sol[:d], np.clip(sol[d:], 0.0, None)


def solve_qp(prob: QpProblem, max_iter: int = 10_000, tol: float = 1e-10) -> QpSolution:
    d, p = prob.dim, prob.n_ineq
    factor, hess_reg = _regularised_factor(prob.hess)
    hinv = lambda v: cho_solve(factor, v)  # noqa: E731

    # constraint i in the form  nrm_i' x >= b_i
    nrm = -prob.g_ineq
    b = prob.h_ineq
    scale = 1.0 + np.abs(b)

    x = -hinv(prob.lin)
    active: list[int] = []
    u = np.zeros(0)
    it = 0
    status = None

    while status is None:
        slack = nrm @ x - b
        cand = slack / scale
        cand[active] = np.inf
        if p == 0 or cand.min() >= -tol:
            status = QpStatus.OPTIMAL
            break
        k_add = int(np.argmin(cand))
        n_p = nrm[k_add]
        u_plus = np.append(u, 0.0)
        hn = hinv(n_p)
        z_ref = float(n_p @ hn)

        while True:
            it += 1
            if it > max_iter:
                status = QpStatus.MAX_ITER
                break
            if active:
                na = nrm[active].T
                h_na = hinv(na)
                r = np.linalg.solve(na.T @ h_na, na.T @ hn)
                z = hn - h_na @ r
            else:
                r = np.zeros(0)
                z = hn

            # partial (dual) step length, limited by multipliers hitting zero
            t1, k_drop = np.inf, -1
            pos = np.nonzero(r > 1e-12 * max(1.0, np.abs(r).max(initial=0.0)))[0]
            if pos.size:
                ratios = u_plus[pos] / r[pos]
                j = int(np.argmin(ratios))
                t1, k_drop = float(ratios[j]), int(pos[j])

            # full (primal) step length, making constraint k_add active
            zn = float(z @ n_p)
            t2 = np.inf
            if zn > 1e-12 * z_ref:
                t2 = -(n_p @ x - b[k_add]) / zn

            if np.isinf(t1) and np.isinf(t2):
                status = QpStatus.INFEASIBLE
                break
            if np.isinf(t2):
                u_plus[:-1] -= t1 * r
                u_plus[-1] += t1
                u_plus = np.delete(u_plus, k_drop)
                del active[k_drop]
                continue

            t = min(t1, t2)
            x = x + t * z
            u_plus[:-1] -= t * r
            u_plus[-1] += t
            if t2 <= t1:
                active.append(k_add)
                u = np.clip(u_plus, 0.0, None)
                break
            u_plus = np.delete(u_plus, k_drop)
            del active[k_drop]

    duals = np.zeros(p)
    p1 = None
    if status is QpStatus.OPTIMAL:
        x, u = _polish(hess_reg, prob, active, x, u)
        duals[active] = u
    elif status is QpStatus.INFEASIBLE:
        p1 = phase1_residual(prob.g_ineq, prob.h_ineq)
        if p1 < INFEASIBLE_RESIDUAL:
            status = QpStatus.MAX_ITER
    stat, comp, viol = kkt_residuals(prob, x, duals)
    return QpSolution(x=x, duals=duals, status=status, kkt_stationarity=stat,
                      kkt_complementarity=comp, primal_violation=viol,
                      iterations=it, active=tuple(active), phase1_residual=p1)
