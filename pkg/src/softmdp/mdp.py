"""Tabular MDP, policy and regularizer types plus seeded instance generation.

Value functions and action-value functions are plain float64 arrays of
shape ``(S,)`` and ``(S, A)``; policies are row-stochastic ``(S, A)`` arrays.

Random instances use numpy's ``PCG64`` bit generator seeded directly with the
integer seed (``np.random.Generator(np.random.PCG64(seed))``). Draw order is
fixed: first the transition kernel, as ``standard_exponential`` samples of
shape ``(S, A, S)`` normalized along the last axis (a flat Dirichlet), then the
rewards, as ``uniform(low, high)`` samples of shape ``(S, A)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

ROW_SUM_ATOL = 1e-9

NONE = "none"
ENTROPY = "entropy"
KL = "kl"
REGULARIZER_KINDS = (NONE, ENTROPY, KL)


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite discounted MDP with dense reward and transition tables.

    Construction only checks shapes; use :func:`validate_mdp` for the
    numerical invariants (stochastic rows, finite rewards, ``0 <= gamma < 1``).
    ``initial_distribution`` is carried for file round-trips and is not used
    by any solver.
    """

    rewards: np.ndarray
    transitions: np.ndarray
    gamma: float
    initial_distribution: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        rewards = _frozen(self.rewards, 2, "rewards")
        transitions = _frozen(self.transitions, 3, "transitions")
        s, a = rewards.shape
        if transitions.shape != (s, a, s):
            raise ValueError(
                f"transitions shape {transitions.shape} does not match rewards shape {rewards.shape}"
            )
        if s < 1 or a < 1:
            raise ValueError("state and action spaces must be non-empty")
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.initial_distribution is not None:
            rho = _frozen(self.initial_distribution, 1, "initial_distribution")
            if rho.shape != (s,):
                raise ValueError("initial_distribution must have one entry per state")
            object.__setattr__(self, "initial_distribution", rho)

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TabularMdp):
            return NotImplemented
        if (self.initial_distribution is None) != (other.initial_distribution is None):
            return False
        same_rho = self.initial_distribution is None or np.array_equal(
            self.initial_distribution, other.initial_distribution
        )
        return (
            self.gamma == other.gamma
            and np.array_equal(self.rewards, other.rewards)
            and np.array_equal(self.transitions, other.transitions)
            and same_rho
        )

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    path: tuple
    message: str
    deviation: float

    def __str__(self):
        where = "".join(f"[{i}]" for i in self.path)
        return f"{self.message} at {where}" if where else self.message


def validate_mdp(mdp: TabularMdp) -> list[Violation]:
    """Return every invariant violation of ``mdp``; an empty list means valid."""
    out: list[Violation] = []
    g = mdp.gamma
    if not (np.isfinite(g) and 0.0 <= g < 1.0):
        dev = abs(g - 1.0) if g >= 1.0 else abs(g) if np.isfinite(g) else float("inf")
        out.append(Violation((), f"gamma {g!r} not in [0,1)", dev))

    r = mdp.rewards
    for s, a in zip(*np.nonzero(~np.isfinite(r))):
        out.append(Violation((int(s), int(a)), f"reward {r[s, a]!r} is not finite", float("inf")))

    p = mdp.transitions
    for s, a, t in zip(*np.nonzero(~((p >= 0.0) & (p <= 1.0)))):
        val = p[s, a, t]
        dev = float(-val if val < 0 else val - 1.0) if np.isfinite(val) else float("inf")
        out.append(
            Violation((int(s), int(a), int(t)), f"transition probability {val!r} outside [0,1]", dev)
        )
    for s in range(mdp.num_states):
        for a in range(mdp.num_actions):
            total = float(sum(p[s, a].tolist()))
            if not abs(total - 1.0) <= ROW_SUM_ATOL:
                out.append(
                    Violation((s, a), f"row sum {total!r} != 1", abs(total - 1.0))
                )

    rho = mdp.initial_distribution
    if rho is not None:
        if not np.all((rho >= 0) & np.isfinite(rho)) or not abs(float(rho.sum()) - 1.0) <= ROW_SUM_ATOL:
            out.append(
                Violation((), "initial_distribution is not a probability vector",
                          abs(float(rho.sum()) - 1.0))
            )
    return out


def validate_policy(probs, num_states: int | None = None, num_actions: int | None = None,
                    strictly_positive: bool = False) -> list[str]:
    """Check a policy table; returns human-readable problems (empty if fine)."""
    pi = np.asarray(probs, dtype=np.float64)
    problems = []
    if pi.ndim != 2:
        return [f"policy must be 2-dimensional, got shape {pi.shape}"]
    if num_states is not None and num_actions is not None and pi.shape != (num_states, num_actions):
        problems.append(f"policy shape {pi.shape} != ({num_states}, {num_actions})")
    if not np.all(np.isfinite(pi)):
        problems.append("policy has non-finite entries")
        return problems
    if strictly_positive:
        bad = np.argwhere(pi <= 0)
        problems.extend(f"policy entry {pi[s, a]!r} not > 0 at [{s}][{a}]" for s, a in bad)
    else:
        bad = np.argwhere(pi < 0)
        problems.extend(f"policy entry {pi[s, a]!r} < 0 at [{s}][{a}]" for s, a in bad)
    for s, row in enumerate(pi):
        total = float(sum(row.tolist()))
        if not abs(total - 1.0) <= ROW_SUM_ATOL:
            problems.append(f"policy row sum {total!r} != 1 at [{s}]")
    return problems


@dataclass(frozen=True, eq=False)
class RegularizerSpec:
    """Which regularizer to add to the reward, and at what temperature.

    ``kind`` is ``"entropy"``, ``"kl"`` (KL divergence to ``prior``) or
    ``"none"``; ``eta`` is ignored for ``"none"``.
    """

    kind: str = ENTROPY
    eta: float = 1.0
    prior: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in REGULARIZER_KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        object.__setattr__(self, "eta", float(self.eta))
        if self.kind != NONE and not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"eta must be > 0 for {self.kind} regularization, got {self.eta!r}")
        if self.kind == KL:
            if self.prior is None:
                raise ValueError("KL regularization requires a prior policy")
            prior = _frozen(self.prior, 2, "prior")
            problems = validate_policy(prior, strictly_positive=True)
            if problems:
                raise ValueError("invalid prior: " + "; ".join(problems))
            object.__setattr__(self, "prior", prior)
        elif self.prior is not None:
            object.__setattr__(self, "prior", _frozen(self.prior, 2, "prior"))

    @classmethod
    def entropy(cls, eta: float) -> "RegularizerSpec":
        return cls(ENTROPY, eta)

    @classmethod
    def kl(cls, eta: float, prior) -> "RegularizerSpec":
        return cls(KL, eta, prior)

    @classmethod
    def none(cls) -> "RegularizerSpec":
        return cls(NONE, 1.0)

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind != NONE:
            d["eta"] = self.eta
        return d


def random_mdp(seed: int, num_states: int, num_actions: int, gamma: float,
               reward_range: Sequence[float] = (-1.0, 1.0)) -> TabularMdp:
    """Deterministic random MDP; see the module docstring for the draw order."""
    if num_states < 1 or num_actions < 1:
        raise ValueError("num_states and num_actions must be >= 1")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma {gamma!r} not in [0,1)")
    low, high = (float(x) for x in reward_range)
    if not (np.isfinite(low) and np.isfinite(high) and low <= high):
        raise ValueError(f"invalid reward range {reward_range!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    raw = rng.standard_exponential((num_states, num_actions, num_states))
    transitions = raw / raw.sum(axis=2, keepdims=True)
    rewards = rng.uniform(low, high, (num_states, num_actions))
    return TabularMdp(rewards, transitions, gamma)


def random_policy(seed: int, num_states: int, num_actions: int) -> np.ndarray:
    """Strictly positive random policy (flat Dirichlet rows, same generator)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    raw = rng.standard_exponential((num_states, num_actions))
    # an exponential draw of exactly 0 is possible in principle
    raw = np.maximum(raw, 1e-12)
    return raw / raw.sum(axis=1, keepdims=True)


def uniform_policy(mdp: TabularMdp) -> np.ndarray:
    return np.full((mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions)
