"""
Exact safety probabilities on finite chains
===========================================

On small Markov chains mission safety can be computed exactly, which makes the
underlying probability arguments checkable: re-planning in the middle of a
mission conserves safety, discounted policy switches keep the product bound, and
Boole's inequality gives a weaker lower bound.
"""

import numpy as np

from mwsmpc import oracle

# safe state 0 stays with probability 0.9; state 1 is unsafe and absorbing
chain = oracle.DiscreteChain.stationary([[0.9, 0.1], [0.0, 1.0]], [True, False], 3)
print("mission safety:", oracle.exact_mwps(chain, 0))
print("survivor-weighted form at k = 1:", oracle.check_lemma1(chain, 0, 1))
print("mission safety vs Boole bound:", oracle.check_boole(chain, 0))

# %%
# Random chains with policies that each keep 90 % of what their predecessor promised.
rng = np.random.default_rng(0)
worst = np.inf
for _ in range(500):
    c = oracle.random_chain(rng)
    gammas = np.full(c.horizon - 1, 0.9)
    pols = oracle.random_policy_switches(rng, c, gammas, adversarial=True)
    mwps, bound = oracle.check_prop1(pols, c.safe_mask, gammas, 0)
    worst = min(worst, mwps - bound)
print("smallest margin over the product bound:", worst)
