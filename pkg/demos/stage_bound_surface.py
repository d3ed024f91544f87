"""
Stage-wise bound implied by a mission-wide target
=================================================

A mission-wide safety level ``S`` over ``N`` steps forces every single stage to be
at least ``(N - 1)/N + S/N`` safe. Long missions therefore need nearly certain
stages even for modest mission-wide targets.
"""

import numpy as np

from mwsmpc import stage_bound, swps_surface

n_values = [1, 2, 5, 11, 20, 50]
s_values = np.linspace(0.5, 1.0, 6)
grid = swps_surface(n_values, s_values)

print("N \\ S " + " ".join(f"{s:7.2f}" for s in s_values))
for n, row in zip(n_values, grid):
    print(f"{n:5d} " + " ".join(f"{v:7.4f}" for v in row))

# %%
# The case study asks for S = 0.8863 over 11 steps.
print("stage bound for N = 11, S = 0.8863:", round(stage_bound(11, 0.8863), 5))
