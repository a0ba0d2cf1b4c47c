"""Pure numpy kernels; fallback for the compiled ``_kernels`` extension.

Every reduction over actions or next states is an explicit ascending-index
accumulation (vectorized across the other axes only), so the floating point
summation order matches the compiled loops exactly.

Regularizer codes: 0 none, 1 entropy, 2 KL to ``prior``.
"""

import numpy as np

# exp(-800) is exactly 0 in double precision; clamping the shifted exponent
# there keeps (x - max) / eta finite for |x| ~ 1e300 and tiny eta
EXP_FLOOR = -800.0

BACKEND = "python"


def q_from_v(rewards, transitions, gamma, v):
    n = transitions.shape[2]
    acc = np.zeros(rewards.shape)
    for t in range(n):
        acc += transitions[:, :, t] * v[t]
    return rewards + gamma * acc


def lse_rows(x, eta, prior=None):
    m = x.max(axis=1)
    acc = np.zeros(x.shape[0])
    for a in range(x.shape[1]):
        e = np.exp(np.maximum(x[:, a] - m, EXP_FLOOR * eta) / eta)
        if prior is not None:
            e = prior[:, a] * e
        acc += e
    return m + eta * np.log(acc)


def optimal_backup(rewards, transitions, gamma, v, kind, eta, prior=None):
    x = q_from_v(rewards, transitions, gamma, v)
    if kind == 0:
        return x.max(axis=1)
    return lse_rows(x, eta, prior if kind == 2 else None)


def _regularized_terms(q, pi, kind, eta, prior, a):
    p = pi[:, a]
    pos = p > 0
    safe = np.where(pos, p, 1.0)
    if kind == 1:
        val = q[:, a] - eta * np.log(safe)
    elif kind == 2:
        val = q[:, a] - eta * np.log(safe / prior[:, a])
    else:
        val = q[:, a]
    return np.where(pos, p * val, 0.0)


def soft_values(q, pi, kind, eta, prior=None):
    acc = np.zeros(q.shape[0])
    for a in range(q.shape[1]):
        acc += _regularized_terms(q, pi, kind, eta, prior, a)
    return acc


def soft_bellman_backup(rewards, transitions, gamma, q, pi, kind, eta, prior=None):
    return q_from_v(rewards, transitions, gamma, soft_values(q, pi, kind, eta, prior))


def softmax_rows(q, eta, prior=None):
    m = q.max(axis=1)
    e = np.empty(q.shape)
    for a in range(q.shape[1]):
        e[:, a] = np.exp(np.maximum(q[:, a] - m, EXP_FLOOR * eta) / eta)
        if prior is not None:
            e[:, a] = prior[:, a] * e[:, a]
    total = np.zeros(q.shape[0])
    for a in range(q.shape[1]):
        total += e[:, a]
    return e / total[:, None]


def policy_aggregates(rewards, transitions, pi, kind, eta, prior=None):
    """Return ``(r_pi + eta * reg_pi, P_pi)`` for the policy's Markov chain."""
    s_count, a_count = rewards.shape
    r_pi = np.zeros(s_count)
    p_pi = np.zeros((s_count, s_count))
    zero_q = np.zeros(rewards.shape)
    for a in range(a_count):
        p = pi[:, a]
        r_pi += np.where(p > 0, p * rewards[:, a], 0.0)
        p_pi += p[:, None] * transitions[:, a, :]
    if kind != 0:
        # soft_values with Q = 0 is exactly sum_a pi * (-eta * log-ratio)
        r_pi = r_pi + soft_values(zero_q, pi, kind, eta, prior)
    return r_pi, p_pi
