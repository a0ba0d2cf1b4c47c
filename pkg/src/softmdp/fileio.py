"""MDP documents and report files.

Both are JSON. Reals are written with 17 significant digits so every double
survives a parse/write round trip byte for byte; dense arrays are laid out one
innermost row per line to keep diffs readable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mdp import TabularMdp, Violation, validate_mdp, validate_policy


class MdpParseError(ValueError):
    pass


def format_real(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def _is_flat(seq) -> bool:
    return all(not isinstance(x, (list, tuple, dict)) for x in seq)


def _emit(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_emit(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if _is_flat(obj):
            return "[" + ", ".join(_emit(x, indent, level + 1) for x in obj) + "]"
        items = [pad + _emit(x, indent, level + 1) for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_real(obj)
    return json.dumps(str(obj))


def dumps(obj, indent: int = 2) -> str:
    return _emit(obj, indent, 0) + "\n"


@dataclass
class MdpDocument:
    mdp: TabularMdp
    prior_policy: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        m = self.mdp
        d = {
            "num_states": m.num_states,
            "num_actions": m.num_actions,
            "gamma": m.gamma,
            "rewards": m.rewards,
            "transitions": m.transitions,
        }
        if m.initial_distribution is not None:
            d["initial_distribution"] = m.initial_distribution
        if self.prior_policy is not None:
            d["prior_policy"] = self.prior_policy
        return d

    def dumps(self) -> str:
        return dumps(self.to_dict())

    def violations(self) -> list:
        out = list(validate_mdp(self.mdp))
        if self.prior_policy is not None:
            problems = validate_policy(self.prior_policy, self.mdp.num_states,
                                       self.mdp.num_actions, strictly_positive=True)
            out.extend(Violation(("prior_policy",), p, float("nan")) for p in problems)
        return out


def _reals(value, ndim: int, name: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise MdpParseError(f"{name}: not a numeric array ({exc})") from None
    if arr.ndim != ndim:
        raise MdpParseError(f"{name}: expected a {ndim}-D array, got shape {arr.shape}")
    return arr


def parse_mdp(text: str) -> MdpDocument:
    """Parse an MDP document; structural problems raise :class:`MdpParseError`.

    Numerical invariants (row sums, gamma range, ...) are left to
    :meth:`MdpDocument.violations`.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MdpParseError(f"malformed document: {exc}") from None
    if not isinstance(raw, dict):
        raise MdpParseError("top level must be an object")
    for key in ("num_states", "num_actions", "gamma", "rewards", "transitions"):
        if key not in raw:
            raise MdpParseError(f"missing field {key!r}")
    s, a = raw["num_states"], raw["num_actions"]
    if not (isinstance(s, int) and isinstance(a, int)) or isinstance(s, bool) or isinstance(a, bool):
        raise MdpParseError("num_states and num_actions must be integers")
    if s < 1 or a < 1:
        raise MdpParseError("num_states and num_actions must be >= 1")
    gamma = raw["gamma"]
    if not isinstance(gamma, (int, float)) or isinstance(gamma, bool):
        raise MdpParseError("gamma must be a number")
    rewards = _reals(raw["rewards"], 2, "rewards")
    transitions = _reals(raw["transitions"], 3, "transitions")
    if rewards.shape != (s, a):
        raise MdpParseError(f"rewards shape {rewards.shape} != ({s}, {a})")
    if transitions.shape != (s, a, s):
        raise MdpParseError(f"transitions shape {transitions.shape} != ({s}, {a}, {s})")
    rho = None
    if raw.get("initial_distribution") is not None:
        rho = _reals(raw["initial_distribution"], 1, "initial_distribution")
        if rho.shape != (s,):
            raise MdpParseError("initial_distribution must have num_states entries")
    prior = None
    if raw.get("prior_policy") is not None:
        prior = _reals(raw["prior_policy"], 2, "prior_policy")
        if prior.shape != (s, a):
            raise MdpParseError(f"prior_policy shape {prior.shape} != ({s}, {a})")
    return MdpDocument(TabularMdp(rewards, transitions, float(gamma), rho), prior)


def read_mdp(path) -> tuple[MdpDocument, str]:
    """Return the parsed document and the sha256 digest of the file bytes."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MdpParseError(f"not UTF-8 text: {exc}") from None
    return parse_mdp(text), hashlib.sha256(data).hexdigest()


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
