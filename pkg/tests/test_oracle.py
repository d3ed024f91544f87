import numpy as np
import pytest

from mwsmpc.oracle import (DiscreteChain, HarnessError, check_boole, check_lemma1, check_prop1,
                           enumerate_mwps, exact_mwps, random_chain, random_policy_switches,
                           random_stochastic, stage_probabilities, survival_values)

# safe state 0 stays with probability 0.9, unsafe state 1 absorbs
LEAKY = DiscreteChain.stationary([[0.9, 0.1], [0.0, 1.0]], [True, False], 3)
ALL_SAFE = DiscreteChain.stationary([[0.5, 0.5], [0.2, 0.8]], [True, True], 4)


def test_exact_mwps_examples():
    assert exact_mwps(ALL_SAFE, 1) == 1.0
    assert exact_mwps(LEAKY, 0) == pytest.approx(0.729, abs=1e-15)
    doomed = DiscreteChain.stationary([[0.0, 1.0], [0.0, 1.0]], [True, False], 3)
    assert exact_mwps(doomed, 0) == 0.0
    assert exact_mwps(LEAKY, 0, from_step=2) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        exact_mwps(LEAKY, 2)
    with pytest.raises(ValueError):
        exact_mwps(LEAKY, 0, from_step=3)


def test_chain_validation():
    with pytest.raises(ValueError):
        DiscreteChain([[[0.5, 0.6], [0.0, 1.0]]], [True, True])
    with pytest.raises(ValueError):
        DiscreteChain([[[1.5, -0.5], [0.0, 1.0]]], [True, True])
    with pytest.raises(ValueError):
        DiscreteChain([[0.5, 0.5], [0.5, 0.5]], [True, True])
    with pytest.raises(ValueError):
        DiscreteChain.stationary(np.eye(11), np.ones(11, bool), 2)
    with pytest.raises(ValueError):
        DiscreteChain.stationary(np.eye(2), [True, True], 11)


def test_random_stochastic_rows():
    P = random_stochastic(np.random.default_rng(0), (500, 6, 6))
    assert np.all(P >= 0)
    assert np.max(np.abs(P.sum(axis=-1) - 1)) <= 1e-15


def test_dp_equals_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(300):
        chain = random_chain(rng)
        for s0 in range(chain.n_states):
            for start in range(chain.horizon):
                assert abs(exact_mwps(chain, s0, start) - enumerate_mwps(chain, s0, start)) <= 1e-12


def test_survival_terminal_row():
    V = survival_values(LEAKY.transition, LEAKY.safe_mask)
    np.testing.assert_array_equal(V[-1], 1.0)
    np.testing.assert_allclose(V[:, 0], [0.729, 0.81, 0.9, 1.0])


def test_survivor_identity_examples():
    assert check_lemma1(LEAKY, 0, 1) == pytest.approx((0.729, 0.729), abs=1e-15)
    assert check_lemma1(ALL_SAFE, 0, 2) == (1.0, 1.0)
    with pytest.raises(ValueError):
        check_lemma1(LEAKY, 0, 3)


def test_survivor_identity_random_four_state():
    rng = np.random.default_rng(2)
    for _ in range(200):
        chain = DiscreteChain(random_stochastic(rng, (5, 4, 4)), rng.random(4) < 0.7)
        for k in range(1, 5):
            lhs, rhs = check_lemma1(chain, int(rng.integers(4)), k)
            assert abs(lhs - rhs) <= 1e-12


def test_switching_bound_identical_policies():
    policies = np.repeat(LEAKY.transition[None], 3, axis=0)
    mwps, bound = check_prop1(policies, LEAKY.safe_mask, [1.0, 1.0], 0)
    assert mwps == pytest.approx(0.729, abs=1e-15)
    assert bound == mwps


def test_switching_bound_is_tight():
    # each replan gives up exactly a factor 0.9 of what was left
    P0 = np.array([[[0.9, 0.1], [0, 1]], [[1, 0], [0, 1]], [[1, 0], [0, 1]]])
    P1, P2 = P0.copy(), P0.copy()
    P1[1] = P0[0]
    P2[1], P2[2] = P0[0], P0[0]
    mwps, bound = check_prop1([P0, P1, P2], [True, False], [0.9, 0.9], 0)
    assert mwps == pytest.approx(0.729, abs=1e-15)
    assert bound == pytest.approx(0.729, abs=1e-15)


def test_switching_bound_rejects_broken_update():
    P0 = np.repeat(np.eye(2)[None], 3, axis=0)
    bad = P0.copy()
    bad[1] = [[0.5, 0.5], [0, 1]]
    with pytest.raises(HarnessError):
        check_prop1([P0, bad, bad], [True, False], [0.9, 0.9], 0)
    with pytest.raises(HarnessError):
        check_prop1([bad, bad, bad], [True, False], [1.0, 1.0], 0, s0_bound=0.9)


@pytest.mark.parametrize("adversarial", [False, True])
def test_switching_bound_random_switches(adversarial):
    rng = np.random.default_rng(3)
    for _ in range(300):
        chain = DiscreteChain(random_stochastic(rng, (4, 3, 3)), [True, True, False])
        gammas = [0.9] * 3 if adversarial else rng.uniform(0.8, 1.0, 3)
        policies = random_policy_switches(rng, chain, gammas, adversarial=adversarial)
        mwps, bound = check_prop1(policies, chain.safe_mask, gammas, 0)
        assert mwps >= bound - 1e-12


def test_boole_examples():
    assert check_boole(LEAKY, 0) == pytest.approx((0.729, 0.439), abs=1e-15)
    assert check_boole(ALL_SAFE, 0) == (1.0, 1.0)
    np.testing.assert_allclose(stage_probabilities(LEAKY, 0), [0.9, 0.81, 0.729])


def test_boole_random():
    rng = np.random.default_rng(4)
    for _ in range(500):
        chain = random_chain(rng)
        mwps, low = check_boole(chain, 0)
        assert mwps >= low - 1e-12
