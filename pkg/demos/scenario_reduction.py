"""
Scenario constraints and their row-max reduction
================================================

Each sampled disturbance sequence contributes one copy of the stacked state
constraints. Only the largest offset in each row can bind, so thousands of
scenarios collapse to a single tightened constraint vector.
"""

import numpy as np

from mwsmpc import build_stacked_prediction, draw_scenarios, required_sample_count
from mwsmpc.config import parse_config
from mwsmpc.scenario import build_h_rows, reduce_rowmax
from mwsmpc.streams import lineage

cfg = parse_config("paper.cfg")
K = cfg.lqr_design().K
h = cfg.spec.n_mission

n0 = required_sample_count(cfg.spec.s0_bound, cfg.spec.beta, h)
print("scenarios needed at k = 0:", n0)

pred = build_stacked_prediction(cfg.system, K, cfg.poly, h)
batch = draw_scenarios(lineage(0), cfg.system.sigma_w, h, n0)
rows = build_h_rows(batch, pred)
red = reduce_rowmax(rows)
print("scenario constraint matrix:", rows.shape, "-> reduced vector:", red.i_max.shape)

# %%
# Tightening per step: how much the position and velocity bounds shrink.
tight = (red.i_max - pred.c_stack).reshape(h, -1)
print("back-off of the upper position bound by step:", np.round(tight[:, 0], 3))
