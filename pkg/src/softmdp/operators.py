"""Regularized Bellman operators on tabular MDPs.

All exponentials are evaluated after subtracting the per-row maximum, and
``0 * log 0`` is taken to be 0 wherever a policy entry vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._backend import kernels
from .mdp import ENTROPY, KL, NONE, ROW_SUM_ATOL, RegularizerSpec, TabularMdp

_KIND_CODE = {NONE: 0, ENTROPY: 1, KL: 2}


@dataclass(frozen=True)
class BackupResult:
    value: np.ndarray
    residual: float


def kind_code(reg: RegularizerSpec) -> int:
    return _KIND_CODE[reg.kind]


def _as_v(mdp: TabularMdp, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (mdp.num_states,):
        raise ValueError(f"value function shape {v.shape} != ({mdp.num_states},)")
    return v


def _as_table(mdp: TabularMdp, x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (mdp.num_states, mdp.num_actions):
        raise ValueError(f"{name} shape {x.shape} != ({mdp.num_states}, {mdp.num_actions})")
    return x


def _prior_for(reg: RegularizerSpec, shape) -> Optional[np.ndarray]:
    if reg.kind != KL:
        return None
    if reg.prior.shape != tuple(shape):
        raise ValueError(f"prior shape {reg.prior.shape} != {tuple(shape)}")
    return reg.prior


def log_sum_exp(values, eta: float, weights=None) -> float:
    """``eta * log(sum_a w_a * exp(x_a / eta))`` with ``w_a = 1`` by default.

    Stable for ``|x|`` up to 1e300 and ``eta`` down to 1e-8; exact for a
    single unweighted element.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("values must be a non-empty vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    if not (np.isfinite(eta) and eta > 0):
        raise ValueError(f"eta must be > 0, got {eta!r}")
    w = None
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != x.shape:
            raise ValueError("weights must match values in length")
        if not np.all(w > 0) or not abs(float(sum(w.tolist())) - 1.0) <= ROW_SUM_ATOL:
            raise ValueError("weights must be strictly positive and sum to 1")
        w = w[None, :]
    return float(kernels.lse_rows(x[None, :], float(eta), w)[0])


def q_from_v(mdp: TabularMdp, v) -> np.ndarray:
    """``Q(s, a) = r(s, a) + gamma * sum_s' p(s'|s, a) v(s')``."""
    return kernels.q_from_v(mdp.rewards, mdp.transitions, mdp.gamma, _as_v(mdp, v))


def optimal_backup(mdp: TabularMdp, reg: RegularizerSpec, v) -> BackupResult:
    """One step of the optimal regularized backup.

    LogSumExp over actions for entropy, prior-weighted LogSumExp for KL and a
    hard max when unregularized.
    """
    v = _as_v(mdp, v)
    prior = _prior_for(reg, mdp.rewards.shape)
    out = kernels.optimal_backup(
        mdp.rewards, mdp.transitions, mdp.gamma, v, kind_code(reg), reg.eta, prior
    )
    return BackupResult(out, float(np.max(np.abs(out - v))))


def soft_state_values(reg: RegularizerSpec, policy, q) -> np.ndarray:
    """``V(s) = sum_a pi(a|s) (Q(s, a) - eta * log(pi(a|s) / prior(a|s)))``.

    The log term is dropped for ``kind="none"`` and the prior is 1 for entropy.
    """
    q = np.asarray(q, dtype=np.float64)
    pi = np.asarray(policy, dtype=np.float64)
    if pi.shape != q.shape:
        raise ValueError(f"policy shape {pi.shape} != Q shape {q.shape}")
    prior = _prior_for(reg, q.shape)
    return kernels.soft_values(q, pi, kind_code(reg), reg.eta, prior)


def soft_bellman_backup(mdp: TabularMdp, reg: RegularizerSpec, policy, q) -> np.ndarray:
    """Apply the soft Bellman operator of ``policy`` to ``q``."""
    q = _as_table(mdp, q, "Q")
    pi = _as_table(mdp, policy, "policy")
    prior = _prior_for(reg, q.shape)
    return kernels.soft_bellman_backup(
        mdp.rewards, mdp.transitions, mdp.gamma, q, pi, kind_code(reg), reg.eta, prior
    )


def softmax_policy(q, reg: RegularizerSpec) -> np.ndarray:
    """Boltzmann policy ``pi ∝ prior * exp(Q / eta)`` (prior = 1 for entropy).

    Very small temperatures may underflow dominated actions to exactly 0.
    """
    if reg.kind == NONE:
        raise ValueError("no softmax policy without a regularizer; use greedy_policy")
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2:
        raise ValueError(f"Q must be 2-dimensional, got shape {q.shape}")
    return kernels.softmax_rows(q, reg.eta, _prior_for(reg, q.shape))


def greedy_policy(q) -> np.ndarray:
    """Deterministic argmax policy; ties go to the lowest action index."""
    q = np.asarray(q, dtype=np.float64)
    pi = np.zeros(q.shape)
    pi[np.arange(q.shape[0]), np.argmax(q, axis=1)] = 1.0
    return pi


def policy_entropy(policy, state: int) -> float:
    row = np.asarray(policy, dtype=np.float64)[state]
    nz = row[row > 0]
    return float(-sum((nz * np.log(nz)).tolist()))


def policy_kl(policy, prior, state: int) -> float:
    row = np.asarray(policy, dtype=np.float64)[state]
    ref = np.asarray(prior, dtype=np.float64)[state]
    if np.any(ref <= 0):
        raise ValueError(f"prior has a non-positive entry in state {state}")
    mask = row > 0
    kl = float(sum((row[mask] * np.log(row[mask] / ref[mask])).tolist()))
    # rounding can leave -1e-17 for identical rows
    return max(kl, 0.0)
