"""
Mission success over a batch
============================

The certified mission-wide guarantee is ``S_0`` times the product of the
discount factors. A batch of independent missions shows how much margin the
closed loop keeps above it. Missions draw from independent seeded streams, so
the result does not depend on worker count.
"""

from dataclasses import replace

import numpy as np

from mwsmpc import run_batch
from mwsmpc.config import parse_config

cfg = parse_config("paper.cfg")
spec = replace(cfg.spec, mc_samples=2000)
res = run_batch(spec, cfg.system, cfg.poly, cfg.lqr_design(), cfg.s0, 50)

print(f"success ratio {res.ratio:.3f} against certified {res.s_certified:.4f}")
print("mean S_k for k = 1..10:", np.round(res.mean_sk, 4))
print("mean N_k:", np.round(res.mean_nk).astype(int))
print("QP statuses:", res.status_counts)
