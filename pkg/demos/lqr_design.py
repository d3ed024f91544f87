"""
LQR gain and terminal cost
==========================

The prediction model pre-stabilises the error dynamics with an LQR gain, and the
Riccati solution doubles as the terminal cost of every finite-horizon plan.
"""

import numpy as np

from mwsmpc import closed_loop_matrix, solve_dare
from mwsmpc.config import parse_config

cfg = parse_config("paper.cfg")
design = solve_dare(cfg.system.A, cfg.system.B, cfg.spec.q_cost, cfg.spec.r_cost)
print("K   =", np.round(design.K, 4))
print("Q_N =", np.round(design.P, 4))
print("iterations:", design.iterations)

# %%
# The closed loop ``A + B K`` is Schur stable, so scenario errors stay bounded.
a_cl = closed_loop_matrix(cfg.system, design.K)
print("closed-loop spectral radius:", np.max(np.abs(np.linalg.eigvals(a_cl))).round(4))
