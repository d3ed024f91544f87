"""
One closed-loop mission
=======================

At each step the controller estimates the remaining mission safety of its
previous plan, discounts it into a risk bound ``S_k``, samples enough scenarios
for that bound and re-solves the shrinking-horizon QP.
"""

from dataclasses import replace

import numpy as np

from mwsmpc import run_mission
from mwsmpc.config import parse_config

cfg = parse_config("paper.cfg")
spec = replace(cfg.spec, mc_samples=2000)
trace = run_mission(spec, cfg.system, cfg.poly, cfg.lqr_design(), cfg.s0, mission=0)

print(" k   position  velocity    input     S_k     N_k  status")
for k in range(spec.n_mission):
    s, u = trace.states[k], trace.inputs[k, 0]
    print(f"{k:2d} {s[0]:10.3f} {s[1]:9.3f} {u:9.3f} {trace.sk_values[k]:8.4f} "
          f"{trace.nk_values[k]:6d}  {trace.qp_statuses[k]}")
print("terminal state:", np.round(trace.states[-1], 3), "safe mission:", trace.success)
