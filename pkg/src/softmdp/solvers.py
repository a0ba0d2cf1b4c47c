"""Soft value iteration and soft policy iteration.

Both routes stop on the plain sup-norm change between successive iterates.
The report keeps ``final_residual`` so callers can form the usual a-posteriori
bound ``residual * gamma / (1 - gamma)`` themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._backend import kernels
from .mdp import NONE, RegularizerSpec, TabularMdp, uniform_policy, validate_policy
from .operators import (
    greedy_policy,
    kind_code,
    q_from_v,
    soft_state_values,
    softmax_policy,
)

ITERATIVE = "iterative"
EXACT = "exact"


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    tolerance: float = 1e-10
    max_iterations: int = 100_000
    evaluation_mode: str = EXACT
    record_trace: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.evaluation_mode not in (ITERATIVE, EXACT):
            raise ValueError(f"unknown evaluation mode {self.evaluation_mode!r}")

    def as_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
            "evaluation_mode": self.evaluation_mode,
            "record_trace": self.record_trace,
        }


@dataclass
class SolveReport:
    method: str
    fixed_point_v: np.ndarray
    fixed_point_q: np.ndarray
    policy: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    trace: Optional[list] = None
    # SPI only: Q^{pi_k} for every evaluated policy, when tracing
    q_trace: Optional[list] = None
    reason: str = ""
    extra: dict = field(default_factory=dict)


def _prior(reg):
    return reg.prior if reg.kind == "kl" else None


def _extract_policy(q, reg: RegularizerSpec) -> np.ndarray:
    return greedy_policy(q) if reg.kind == NONE else softmax_policy(q, reg)


def soft_value_iteration(mdp: TabularMdp, reg: RegularizerSpec,
                         config: SolveConfig = SolveConfig(), v0=None) -> SolveReport:
    """Iterate the optimal (LogSumExp) backup to a fixed point.

    The returned Q is ``q_from_v`` of the final iterate and the policy is its
    softmax (greedy with lowest-index ties when unregularized).
    """
    v = np.zeros(mdp.num_states) if v0 is None else np.array(v0, dtype=np.float64)
    if v.shape != (mdp.num_states,):
        raise ValueError(f"v0 shape {v.shape} != ({mdp.num_states},)")
    if reg.kind == "kl" and reg.prior.shape != mdp.rewards.shape:
        raise ValueError("prior shape does not match the MDP")
    code, eta, prior = kind_code(reg), reg.eta, _prior(reg)
    r, p, gamma = mdp.rewards, mdp.transitions, mdp.gamma
    trace = [] if config.record_trace else None
    residual = float("inf")
    converged = False
    it = 0
    while it < config.max_iterations:
        nxt = kernels.optimal_backup(r, p, gamma, v, code, eta, prior)
        residual = float(np.max(np.abs(nxt - v)))
        v = nxt
        it += 1
        if trace is not None:
            trace.append(residual)
        if residual < config.tolerance:
            converged = True
            break
    q = q_from_v(mdp, v)
    return SolveReport(
        method="vi",
        fixed_point_v=v,
        fixed_point_q=q,
        policy=_extract_policy(q, reg),
        iterations=it,
        final_residual=residual,
        converged=converged,
        trace=trace,
        reason="" if converged else f"residual {residual:.3e} after {it} iterations",
    )


def soft_policy_evaluation(mdp: TabularMdp, reg: RegularizerSpec, policy,
                           config: SolveConfig = SolveConfig()) -> np.ndarray:
    """Fixed point ``Q^pi`` of the soft Bellman operator for ``policy``.

    ``exact`` solves ``(I - gamma P_pi) V = r_pi + eta * reg_pi`` by LU with
    partial pivoting; ``iterative`` repeats the backup until the sup-norm
    change drops below the tolerance.
    """
    pi = np.asarray(policy, dtype=np.float64)
    problems = validate_policy(pi, mdp.num_states, mdp.num_actions)
    if problems:
        raise ValueError("invalid policy: " + "; ".join(problems))
    code, eta, prior = kind_code(reg), reg.eta, _prior(reg)
    r, p, gamma = mdp.rewards, mdp.transitions, mdp.gamma
    if config.evaluation_mode == EXACT:
        r_pi, p_pi = kernels.policy_aggregates(r, p, pi, code, eta, prior)
        v = np.linalg.solve(np.eye(mdp.num_states) - gamma * p_pi, r_pi)
        return q_from_v(mdp, v)

    q = np.array(r)
    for _ in range(config.max_iterations):
        nxt = kernels.soft_bellman_backup(r, p, gamma, q, pi, code, eta, prior)
        delta = float(np.max(np.abs(nxt - q)))
        q = nxt
        if delta < config.tolerance:
            return q
    raise ConvergenceError(
        f"policy evaluation did not reach {config.tolerance:g} in {config.max_iterations} sweeps"
    )


def soft_policy_improvement(q, reg: RegularizerSpec) -> np.ndarray:
    """Softmax of Q under the regularizer; greedy when unregularized."""
    return _extract_policy(q, reg)


def soft_policy_iteration(mdp: TabularMdp, reg: RegularizerSpec,
                          config: SolveConfig = SolveConfig(), pi0=None) -> SolveReport:
    """Alternate exact (or iterative) soft evaluation with softmax improvement.

    Stops once successive ``Q^{pi_k}`` differ by less than the tolerance in sup
    norm. The reported policy is the softmax of the final Q, and the reported
    V is its regularized state value.
    """
    pi = uniform_policy(mdp) if pi0 is None else np.array(pi0, dtype=np.float64)
    problems = validate_policy(pi, mdp.num_states, mdp.num_actions,
                               strictly_positive=reg.kind != NONE)
    if problems:
        raise ValueError("invalid initial policy: " + "; ".join(problems))

    trace = [] if config.record_trace else None
    q_trace = [] if config.record_trace else None
    residual = float("inf")
    converged = False
    reason = ""
    it = 0
    q = None
    try:
        q = soft_policy_evaluation(mdp, reg, pi, config)
        if q_trace is not None:
            q_trace.append(q)
        while it < config.max_iterations:
            pi = soft_policy_improvement(q, reg)
            q_next = soft_policy_evaluation(mdp, reg, pi, config)
            residual = float(np.max(np.abs(q_next - q)))
            q = q_next
            it += 1
            if trace is not None:
                trace.append(residual)
                q_trace.append(q)
            if residual < config.tolerance:
                converged = True
                break
        else:
            reason = f"residual {residual:.3e} after {it} iterations"
    except ConvergenceError as exc:
        reason = str(exc)
        if q is None:
            q = np.array(mdp.rewards)

    policy = soft_policy_improvement(q, reg)
    return SolveReport(
        method="spi",
        fixed_point_v=soft_state_values(reg, policy, q),
        fixed_point_q=q,
        policy=policy,
        iterations=it,
        final_residual=residual,
        converged=converged,
        trace=trace,
        q_trace=q_trace,
        reason=reason,
    )
