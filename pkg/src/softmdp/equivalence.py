"""Run both solver routes on the same instance and measure how far apart they land."""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .mdp import ENTROPY, KL, NONE, RegularizerSpec, TabularMdp, random_mdp, random_policy
from .solvers import SolveConfig, SolveReport, soft_policy_iteration, soft_value_iteration

DEFAULT_THRESHOLD = 1e-6
# q_gap <= GAP_CONSTANT * tolerance for converged routes with gamma <= 0.95:
# value iteration stops within tol * gamma / (1 - gamma) <= 19 * tol of the fixed point
GAP_CONSTANT = 100.0


@dataclass
class EquivalenceReport:
    q_gap: float
    v_gap: float
    policy_gap: float
    vi_iterations: int
    spi_iterations: int
    verdict: str
    threshold: float
    vi_converged: bool = True
    spi_converged: bool = True
    # max_s (V^{pi*}(s) - V*(s)); should never be meaningfully positive
    value_dominance_excess: float = 0.0
    reason: str = ""
    vi: Optional[SolveReport] = field(default=None, repr=False, compare=False)
    spi: Optional[SolveReport] = field(default=None, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def converged(self) -> bool:
        return self.vi_converged and self.spi_converged

    def as_dict(self) -> dict:
        return {
            "q_gap": self.q_gap,
            "v_gap": self.v_gap,
            "policy_gap": self.policy_gap,
            "vi_iterations": self.vi_iterations,
            "spi_iterations": self.spi_iterations,
            "vi_converged": self.vi_converged,
            "spi_converged": self.spi_converged,
            "value_dominance_excess": self.value_dominance_excess,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "reason": self.reason,
        }


def total_variation(p, q) -> float:
    """Largest per-state total-variation distance between two policies."""
    return float(np.max(0.5 * np.sum(np.abs(np.asarray(p) - np.asarray(q)), axis=1)))


def compare_reports(vi: SolveReport, spi: SolveReport, threshold: float) -> EquivalenceReport:
    q_gap = float(np.max(np.abs(vi.fixed_point_q - spi.fixed_point_q)))
    v_gap = float(np.max(np.abs(vi.fixed_point_v - spi.fixed_point_v)))
    policy_gap = total_variation(vi.policy, spi.policy)
    reasons = []
    if not vi.converged:
        reasons.append(f"value iteration did not converge ({vi.reason})")
    if not spi.converged:
        reasons.append(f"policy iteration did not converge ({spi.reason})")
    if q_gap > threshold:
        reasons.append(f"q_gap {q_gap:.3e} > {threshold:g}")
    if policy_gap > threshold:
        reasons.append(f"policy_gap {policy_gap:.3e} > {threshold:g}")
    return EquivalenceReport(
        q_gap=q_gap,
        v_gap=v_gap,
        policy_gap=policy_gap,
        vi_iterations=vi.iterations,
        spi_iterations=spi.iterations,
        verdict="fail" if reasons else "pass",
        threshold=threshold,
        vi_converged=vi.converged,
        spi_converged=spi.converged,
        value_dominance_excess=float(np.max(spi.fixed_point_v - vi.fixed_point_v)),
        reason="; ".join(reasons),
        vi=vi,
        spi=spi,
    )


def check_equivalence(mdp: TabularMdp, reg: RegularizerSpec, config: SolveConfig = SolveConfig(),
                      threshold: float = DEFAULT_THRESHOLD) -> EquivalenceReport:
    """Solve by value iteration and by policy iteration, then compare.

    The verdict passes iff both routes converged and the Q and policy gaps
    are within ``threshold``.
    """
    if reg.kind == NONE:
        raise ValueError("equivalence is defined for entropy or KL regularization")
    vi = soft_value_iteration(mdp, reg, config)
    spi = soft_policy_iteration(mdp, reg, config)
    return compare_reports(vi, spi, threshold)


@dataclass
class SuiteInstance:
    instance_id: str
    mdp: TabularMdp
    reg: RegularizerSpec
    config: Optional[SolveConfig] = None


def random_suite(count: int, seed: int, states=(2, 20), actions=(2, 8), gammas=(0.5, 0.95),
                 etas: Sequence[float] = (0.01, 0.1, 1.0, 10.0),
                 kinds: Sequence[str] = (ENTROPY, KL),
                 reward_range=(-1.0, 1.0)) -> list[SuiteInstance]:
    """Seeded random MDPs crossed with every temperature and regularizer kind.

    MDP ``i`` draws its shape, discount and sub-seeds from
    ``default_rng([seed, i])``; the KL prior is a random strictly positive
    policy drawn per MDP.
    """
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        s = int(rng.integers(states[0], states[1] + 1))
        a = int(rng.integers(actions[0], actions[1] + 1))
        g = float(rng.uniform(gammas[0], gammas[1]))
        mdp_seed, prior_seed = (int(x) for x in rng.integers(0, 2**63 - 1, 2))
        mdp = random_mdp(mdp_seed, s, a, g, reward_range)
        prior = random_policy(prior_seed, s, a)
        for kind in kinds:
            for eta in etas:
                reg = RegularizerSpec(kind, eta, prior if kind == KL else None)
                out.append(SuiteInstance(f"{i:04d}-{kind}-{eta:g}", mdp, reg))
    return out


@dataclass
class SweepResult:
    reports: list
    summary: dict


def _run_one(args):
    mdp, reg, config, threshold, keep = args
    rep = check_equivalence(mdp, reg, config, threshold)
    if not keep:
        rep.vi = rep.spi = None
    return rep


def _stats(xs) -> dict:
    return {"min": min(xs), "mean": statistics.fmean(xs), "max": max(xs)}


def summarize(reports: Sequence[EquivalenceReport]) -> dict:
    return {
        "instances": len(reports),
        "passed": sum(r.passed for r in reports),
        "failed": sum(not r.passed for r in reports),
        "nonconverged": sum(not r.converged for r in reports),
        "max_q_gap": max(r.q_gap for r in reports),
        "max_v_gap": max(r.v_gap for r in reports),
        "max_policy_gap": max(r.policy_gap for r in reports),
        "vi_iterations": _stats([r.vi_iterations for r in reports]),
        "spi_iterations": _stats([r.spi_iterations for r in reports]),
    }


def sweep(instances, config: SolveConfig = SolveConfig(), threshold: float = DEFAULT_THRESHOLD,
          jobs: int = 1, keep_reports: bool = False) -> SweepResult:
    """Run :func:`check_equivalence` on each instance, in input order.

    ``instances`` holds ``SuiteInstance`` objects or ``(mdp, reg)`` /
    ``(mdp, reg, config)`` tuples; a per-instance config overrides ``config``.
    A failing instance never stops the sweep.
    """
    if not instances:
        raise ValueError("sweep needs at least one instance")
    jobs_in = []
    for inst in instances:
        if isinstance(inst, SuiteInstance):
            mdp, reg, cfg = inst.mdp, inst.reg, inst.config
        else:
            mdp, reg, *rest = inst
            cfg = rest[0] if rest else None
        jobs_in.append((mdp, reg, cfg or config, threshold, keep_reports and jobs == 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_one, jobs_in, chunksize=8))
    else:
        reports = [_run_one(j) for j in jobs_in]
    return SweepResult(reports, summarize(reports))
