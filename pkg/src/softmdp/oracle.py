"""Independent numerical checks for solver outputs.

These deliberately avoid the solver kernels where they can: the KKT
multiplier uses ``scipy.special.logsumexp`` and the exhaustive sweep evaluates
policies with its own batched linear solve.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .mdp import KL, NONE, RegularizerSpec, TabularMdp
from .operators import q_from_v
from .solvers import ConvergenceError, SolveConfig, soft_value_iteration

MAX_EXHAUSTIVE_STATES = 3
MAX_EXHAUSTIVE_ACTIONS = 3
MIN_GRID_RESOLUTION = 5


class InstanceTooLarge(ValueError):
    pass


@dataclass
class KktResult:
    residual: np.ndarray
    multiplier: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residual)))


def kkt_residual(mdp: TabularMdp, reg: RegularizerSpec, v, policy) -> KktResult:
    """Stationarity residual of the per-state Lagrangian at ``(v, policy)``.

    ``residual(s, a) = Q(s, a) - eta * log(pi/prior) - eta - lambda(s)`` with
    ``Q = q_from_v(v)`` and ``lambda(s) = eta * log sum_a prior * exp(Q / eta) - eta``
    (prior = 1 for entropy). Zero everywhere exactly at the optimum.
    """
    if reg.kind == NONE:
        raise ValueError("KKT residual needs an entropy or KL regularizer")
    pi = np.asarray(policy, dtype=np.float64)
    if np.any(pi <= 0):
        s, a = np.argwhere(pi <= 0)[0]
        raise ValueError(f"policy entry [{s}][{a}] is not strictly positive")
    eta = reg.eta
    q = q_from_v(mdp, v)
    weights = reg.prior if reg.kind == KL else None
    lam = eta * logsumexp(q / eta, axis=1, b=weights) - eta
    ratio = pi / reg.prior if reg.kind == KL else pi
    res = q - eta * np.log(ratio) - eta - lam[:, None]
    return KktResult(res, lam)


def multiplier_identity_gap(mdp: TabularMdp, reg: RegularizerSpec, v, policy) -> float:
    """``max_s |lambda(s) - (v(s) - eta)|``; vanishes at the optimal value."""
    kkt = kkt_residual(mdp, reg, v, policy)
    return float(np.max(np.abs(kkt.multiplier - (np.asarray(v) - reg.eta))))


@dataclass
class Prop1Report:
    passed: bool
    trials: int
    max_excess: float
    violations: list = field(default_factory=list)


def proposition1_check(mdp: TabularMdp, reg: RegularizerSpec, v_star, trials: int = 500,
                       seed: int = 0, atol: float = 1e-12) -> Prop1Report:
    """Draw dominated value functions ``V <= v_star`` and confirm ``Q <= Q*``.

    ``reg`` does not enter the comparison (Q* is ``q_from_v(v_star)`` for every
    regularizer) but is kept so the call mirrors the other checks. Trial ``k``
    draws from ``default_rng([seed, k])``; trial 0 is ``V = v_star`` itself.
    """
    v_star = np.asarray(v_star, dtype=np.float64)
    q_star = q_from_v(mdp, v_star)
    excess_max = -np.inf
    violations = []
    for k in range(trials):
        if k == 0:
            v = v_star
        else:
            rng = np.random.default_rng([seed, k])
            scale = 10.0 ** rng.uniform(-12, 1)
            noise = rng.exponential(scale, mdp.num_states)
            noise[rng.random(mdp.num_states) < 0.3] = 0.0
            v = v_star - noise
        q = q_from_v(mdp, v)
        excess = q - q_star
        worst = float(excess.max())
        excess_max = max(excess_max, worst)
        if worst > atol:
            s, a = np.unravel_index(int(np.argmax(excess)), excess.shape)
            violations.append({"trial": k, "state": int(s), "action": int(a), "excess": worst})
    return Prop1Report(not violations, trials, float(excess_max), violations)


def simplex_grid(num_actions: int, resolution: int) -> np.ndarray:
    """Interior simplex points, ``resolution`` per edge, every coordinate >= 1/(2*resolution)."""
    n = resolution - 1
    eps = 1.0 / (2 * resolution)
    rows = []
    for cuts in itertools.combinations(range(n + num_actions - 1), num_actions - 1):
        bounds = (-1,) + cuts + (n + num_actions - 1,)
        counts = [bounds[i + 1] - bounds[i] - 1 for i in range(num_actions)]
        rows.append(counts)
    k = np.array(rows, dtype=np.float64)
    return eps + (1.0 - num_actions * eps) * k / n


def _batched_q(mdp: TabularMdp, reg: RegularizerSpec, policies: np.ndarray) -> np.ndarray:
    r, p, g = mdp.rewards, mdp.transitions, mdp.gamma
    r_pi = np.einsum("nsa,sa->ns", policies, r)
    if reg.kind != NONE:
        logs = np.log(np.where(policies > 0, policies, 1.0))
        if reg.kind == KL:
            logs = logs - np.log(reg.prior)[None]
        r_pi = r_pi - reg.eta * np.sum(np.where(policies > 0, policies * logs, 0.0), axis=2)
    p_pi = np.einsum("nsa,sat->nst", policies, p)
    lhs = np.eye(mdp.num_states)[None] - g * p_pi
    v = np.linalg.solve(lhs, r_pi[..., None])[..., 0]
    return r[None] + g * np.einsum("sat,nt->nsa", p, v)


@dataclass
class ExhaustiveReport:
    passed: bool
    num_policies: int
    max_excess: float
    attainment_gap: float
    reason: str = ""


def exhaustive_policy_check(mdp: TabularMdp, reg: RegularizerSpec, q_star,
                            grid_resolution: int = 11, atol: float = 1e-8,
                            chunk: int = 20_000) -> ExhaustiveReport:
    """Evaluate every grid policy exactly and confirm none beats ``q_star``.

    Regularized: product over states of interior simplex grids. Unregularized:
    every deterministic policy, and the best of them must also reach ``q_star``.
    ``max_excess`` is ``max(Q^pi - q_star)``; ``attainment_gap`` is
    ``max |max_pi Q^pi - q_star|`` over state-action pairs.
    """
    S, A = mdp.num_states, mdp.num_actions
    if S > MAX_EXHAUSTIVE_STATES or A > MAX_EXHAUSTIVE_ACTIONS:
        raise InstanceTooLarge(
            f"exhaustive check limited to |S| <= {MAX_EXHAUSTIVE_STATES} and "
            f"|A| <= {MAX_EXHAUSTIVE_ACTIONS}, got {S} x {A}"
        )
    if grid_resolution < MIN_GRID_RESOLUTION:
        raise ValueError(f"grid_resolution must be >= {MIN_GRID_RESOLUTION}")
    q_star = np.asarray(q_star, dtype=np.float64)
    rows = np.eye(A) if reg.kind == NONE else simplex_grid(A, grid_resolution)
    g = rows.shape[0]
    total = g ** S
    best = np.full((S, A), -np.inf)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = np.stack([(idx // g ** s) % g for s in range(S)], axis=1)
        q = _batched_q(mdp, reg, rows[digits])
        best = np.maximum(best, q.max(axis=0))
    excess = float((best - q_star).max())
    gap = float(np.abs(best - q_star).max())
    passed = excess <= atol
    reason = "" if passed else f"a grid policy exceeds Q* by {excess:.3e}"
    if reg.kind == NONE and passed and gap > atol:
        passed = False
        reason = f"best deterministic policy misses Q* by {gap:.3e}"
    return ExhaustiveReport(passed, total, excess, gap, reason)


def long_run_reference(mdp: TabularMdp, reg: RegularizerSpec,
                       config: SolveConfig = SolveConfig()) -> np.ndarray:
    """Value iteration at tolerance 1e-13 with ten times the iteration budget."""
    tight = SolveConfig(tolerance=1e-13, max_iterations=10 * config.max_iterations)
    report = soft_value_iteration(mdp, reg, tight)
    if not report.converged:
        raise ConvergenceError(f"long-run reference did not converge: {report.reason}")
    return report.fixed_point_v
