import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from softmdp.mdp import RegularizerSpec, TabularMdp, random_mdp, random_policy, uniform_policy
from softmdp.operators import (
    greedy_policy,
    log_sum_exp,
    optimal_backup,
    policy_entropy,
    policy_kl,
    q_from_v,
    soft_bellman_backup,
    softmax_policy,
)

from conftest import assert_stochastic

LN2 = math.log(2.0)
# 30-digit mpmath evaluations of the closed forms
LSE_1_0 = 1.31326168751822283404899549497  # ln(e + 1)
LSE_1_0_HALF = 0.62011450695827752463176337351  # ln((e + 1) / 2)
SOFTMAX_1_0 = (0.731058578630004879251159241822, 0.268941421369995120748840758178)
SOFTMAX_1_0_PRIOR = (0.960729699449949429585163560148, 0.0392703005500505704148364398516)

ENT = RegularizerSpec.entropy(1.0)


def kl_uniform(mdp, eta=1.0):
    return RegularizerSpec.kl(eta, uniform_policy(mdp))


# -- log_sum_exp -------------------------------------------------------------

def test_lse_equal_values():
    assert log_sum_exp([0.0, 0.0], 1.0) == pytest.approx(LN2, abs=1e-15)


def test_lse_single_element_exact():
    assert log_sum_exp([5.0], 2.0) == 5.0


def test_lse_two_values():
    assert log_sum_exp([1.0, 0.0], 1.0) == pytest.approx(LSE_1_0, abs=1e-15)


def test_lse_weighted():
    got = log_sum_exp([1.0, 0.0], 1.0, [0.5, 0.5])
    assert got == pytest.approx(LSE_1_0_HALF, abs=1e-15)
    assert got == pytest.approx(log_sum_exp([1.0, 0.0], 1.0) - LN2, abs=1e-15)


@pytest.mark.filterwarnings("error")
def test_lse_extreme_inputs():
    assert log_sum_exp([1e300, -1e300], 1e-8) == 1e300
    assert log_sum_exp([-1e300, -1e300], 1e-8) == pytest.approx(-1e300)
    assert math.isfinite(log_sum_exp([1e300, 1e300, 0.0], 1e-8, [0.2, 0.3, 0.5]))


@pytest.mark.parametrize("args", [([], 1.0), ([1.0, np.inf], 1.0), ([1.0], 0.0), ([1.0], -1.0),
                                  ([1.0, 2.0], 1.0, [0.5]), ([1.0, 2.0], 1.0, [1.0, 0.0])])
def test_lse_rejects(args):
    with pytest.raises(ValueError):
        log_sum_exp(*args)


finite_rows = arrays(np.float64, st.integers(1, 8), elements=st.floats(-100, 100))
etas = st.floats(0.01, 100.0)


@settings(max_examples=300, deadline=None)
@given(x=finite_rows, eta=etas)
def test_lse_bounds(x, eta):
    val = log_sum_exp(x, eta)
    slack = 1e-12 * (1 + abs(x).max())
    assert x.max() - slack <= val <= x.max() + eta * math.log(x.size) + slack


@settings(max_examples=300, deadline=None)
@given(x=finite_rows, eta=etas, data=st.data())
def test_weighted_lse_below_max(x, eta, data):
    raw = data.draw(arrays(np.float64, x.size, elements=st.floats(0.01, 1.0)))
    w = raw / raw.sum()
    if abs(w.sum() - 1.0) > 1e-9:
        return
    assert log_sum_exp(x, eta, w) <= x.max() + 1e-12 * (1 + abs(x).max())


@settings(max_examples=300, deadline=None)
@given(x=finite_rows, eta=etas)
def test_kl_to_uniform_shift_identity(x, eta):
    n = x.size
    weighted = log_sum_exp(x, eta, np.full(n, 1.0 / n))
    assert weighted == pytest.approx(log_sum_exp(x, eta) - eta * math.log(n), rel=0, abs=1e-12)


# -- soft Bellman backup -----------------------------------------------------

def test_soft_backup_single_action(one_action):
    q = soft_bellman_backup(one_action, ENT, [[1.0]], [[0.0]])
    assert q.tolist() == [[1.0]]


def test_soft_backup_entropy_bonus(symmetric):
    q = soft_bellman_backup(symmetric, ENT, uniform_policy(symmetric), [[0.0, 0.0]])
    np.testing.assert_allclose(q, [[0.5 * LN2, 0.5 * LN2]], rtol=0, atol=1e-15)


def test_soft_backup_zero_kl(symmetric):
    q = soft_bellman_backup(symmetric, kl_uniform(symmetric), uniform_policy(symmetric), [[0.0, 0.0]])
    np.testing.assert_allclose(q, [[0.0, 0.0]], rtol=0, atol=1e-16)


def test_soft_backup_shape_mismatch(symmetric):
    with pytest.raises(ValueError):
        soft_bellman_backup(symmetric, ENT, [[1.0]], [[0.0, 0.0]])
    with pytest.raises(ValueError):
        soft_bellman_backup(symmetric, RegularizerSpec.kl(1.0, [[1.0]]), [[0.5, 0.5]], [[0.0, 0.0]])


@pytest.mark.parametrize("seed", range(10))
def test_unregularized_point_mass_backup_is_standard(seed):
    rng = np.random.default_rng(seed)
    m = random_mdp(seed, 5, 3, 0.8)
    q = rng.normal(size=(5, 3))
    pi = greedy_policy(rng.normal(size=(5, 3)))
    got = soft_bellman_backup(m, RegularizerSpec.none(), pi, q)
    chosen = q[np.arange(5), pi.argmax(axis=1)]
    want = np.empty((5, 3))
    for s in range(5):
        for a in range(3):
            acc = 0.0
            for t in range(5):
                acc += m.transitions[s, a, t] * chosen[t]
            want[s, a] = m.rewards[s, a] + 0.8 * acc
    assert np.array_equal(got, want)


# -- optimal backup ----------------------------------------------------------

def test_optimal_backup_entropy_from_zero(symmetric):
    res = optimal_backup(symmetric, ENT, [0.0])
    assert res.value[0] == pytest.approx(LN2, abs=1e-15)
    assert res.residual == pytest.approx(LN2, abs=1e-15)


def test_optimal_backup_unregularized(symmetric):
    res = optimal_backup(symmetric, RegularizerSpec.none(), [0.0])
    assert res.value.tolist() == [0.0] and res.residual == 0.0


def test_optimal_backup_kl_uniform(symmetric):
    # x = [ln2, ln2]; 0.5*e^0 + 0.5*e^0 = 1, so the weighted LSE is ln 2 itself
    res = optimal_backup(symmetric, kl_uniform(symmetric), [2 * LN2])
    direct = math.log(0.5 * math.exp(LN2) + 0.5 * math.exp(LN2))
    assert res.value[0] == pytest.approx(direct, abs=1e-15)
    assert res.value[0] == pytest.approx(LN2, abs=1e-15)
    assert res.residual == pytest.approx(LN2, abs=1e-15)


def test_optimal_backup_residual_is_sup_change():
    m = random_mdp(4, 6, 3, 0.9)
    v = np.linspace(-1, 1, 6)
    res = optimal_backup(m, ENT, v)
    assert res.residual == np.max(np.abs(res.value - v))


# -- q_from_v ----------------------------------------------------------------

def test_q_from_zero_v_is_rewards():
    m = random_mdp(1, 4, 3, 0.7)
    assert np.array_equal(q_from_v(m, np.zeros(4)), m.rewards)


def test_q_from_v_scalar(one_action):
    assert q_from_v(one_action, [2.0]).tolist() == [[2.0]]


def test_q_from_v_matches_triple_loop():
    m = random_mdp(11, 4, 3, 0.9)
    v = np.random.default_rng(11).normal(size=4)
    want = [[m.rewards[s, a] + m.gamma * sum(m.transitions[s, a, t] * v[t] for t in range(4))
             for a in range(3)] for s in range(4)]
    np.testing.assert_allclose(q_from_v(m, v), want, rtol=0, atol=1e-14)


def test_q_from_v_shape_mismatch(one_action):
    with pytest.raises(ValueError):
        q_from_v(one_action, [1.0, 2.0])


# -- softmax -----------------------------------------------------------------

@pytest.mark.parametrize("c", [-50.0, 0.0, 3.25, 1e6])
def test_softmax_constant_row(c):
    pi = softmax_policy([[c, c, c]], ENT)
    np.testing.assert_allclose(pi, [[1 / 3] * 3], rtol=0, atol=1e-16)


def test_softmax_two_actions():
    np.testing.assert_allclose(softmax_policy([[1.0, 0.0]], ENT), [SOFTMAX_1_0], rtol=0, atol=1e-15)


@pytest.mark.filterwarnings("error")
def test_softmax_small_temperature_is_stable():
    pi = softmax_policy([[1.0, 0.0]], RegularizerSpec.entropy(1e-3))
    assert np.all(np.isfinite(pi))
    assert pi[0, 0] == 1.0 and pi[0, 1] < 1e-300
    assert pi.sum() == 1.0


def test_softmax_with_prior():
    reg = RegularizerSpec.kl(1.0, [[0.9, 0.1]])
    np.testing.assert_allclose(softmax_policy([[1.0, 0.0]], reg), [SOFTMAX_1_0_PRIOR],
                               rtol=0, atol=1e-15)


def test_softmax_requires_regularizer():
    with pytest.raises(ValueError):
        softmax_policy([[1.0, 0.0]], RegularizerSpec.none())


@settings(max_examples=200, deadline=None)
@given(q=arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                elements=st.floats(-100, 100)),
       eta=st.floats(0.05, 50.0), data=st.data())
def test_softmax_rows_and_shift_invariance(q, eta, data):
    reg = RegularizerSpec.entropy(eta)
    pi = softmax_policy(q, reg)
    assert_stochastic(pi, atol=1e-12)
    shift = data.draw(arrays(np.float64, q.shape[0], elements=st.floats(-100, 100)))
    np.testing.assert_allclose(softmax_policy(q + shift[:, None], reg), pi, rtol=0, atol=1e-12)


# -- entropy and KL ----------------------------------------------------------

def test_entropy_uniform_four():
    assert policy_entropy(np.full((1, 4), 0.25), 0) == pytest.approx(math.log(4), abs=1e-15)


def test_entropy_point_mass():
    assert policy_entropy([[0.0, 1.0, 0.0]], 0) == 0.0


def test_kl_identical_rows():
    u = np.full((2, 3), 1 / 3)
    assert policy_kl(u, u, 1) == 0.0


def test_kl_zero_prior_rejected():
    with pytest.raises(ValueError):
        policy_kl([[0.5, 0.5]], [[1.0, 0.0]], 0)


@pytest.mark.parametrize("seed", range(30))
def test_entropy_and_kl_ranges(seed):
    a = 1 + seed % 6
    pi = random_policy(seed, 3, a)
    prior = random_policy(seed + 100, 3, a)
    for s in range(3):
        assert -1e-15 <= policy_entropy(pi, s) <= math.log(a) + 1e-12
        assert policy_kl(pi, prior, s) >= 0.0


# -- contraction -------------------------------------------------------------

def _contraction_regs(mdp, rng):
    return [RegularizerSpec.entropy(float(rng.uniform(0.01, 10))),
            RegularizerSpec.kl(float(rng.uniform(0.01, 10)),
                               random_policy(int(rng.integers(1 << 30)), mdp.num_states,
                                             mdp.num_actions)),
            RegularizerSpec.none()]


@pytest.mark.parametrize("seed", range(3))
def test_soft_backup_contracts(seed):
    rng = np.random.default_rng(seed)
    m = random_mdp(seed, 6, 4, 0.85)
    for reg in _contraction_regs(m, rng):
        for _ in range(100):
            pi = random_policy(int(rng.integers(1 << 30)), 6, 4)
            q1, q2 = rng.normal(0, 10, (2, 6, 4))
            lhs = np.abs(soft_bellman_backup(m, reg, pi, q1) - soft_bellman_backup(m, reg, pi, q2)).max()
            assert lhs <= m.gamma * np.abs(q1 - q2).max() + 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_optimal_backup_contracts(seed):
    rng = np.random.default_rng(seed)
    m = random_mdp(seed, 6, 4, 0.85)
    for reg in _contraction_regs(m, rng):
        for _ in range(100):
            v1, v2 = rng.normal(0, 10, (2, 6))
            lhs = np.abs(optimal_backup(m, reg, v1).value - optimal_backup(m, reg, v2).value).max()
            assert lhs <= m.gamma * np.abs(v1 - v2).max() + 1e-12
