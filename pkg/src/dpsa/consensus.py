"""Matrix average consensus, scaled-sum recovery, and round scheduling.

The round update at node i is ``Z_i <- w_ii Z_i + sum_j w_ij Z_j`` with the
neighbor sum accumulated in ascending node order.  That accumulation order
is a contract: the socket transport performs the identical sequence of
float64 operations, which is what makes in-process and multi-process runs
bit-identical.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ShapeMismatch
from .netgraph import WeightMatrix
from .validation import check_same_shape

DEFAULT_CAP = 50


@dataclass(frozen=True)
class FixedSchedule:
    """Constant consensus budget per outer iteration."""

    rounds: int

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")

    def rounds_for(self, t: int) -> int:
        if t < 0:
            raise ValueError(f"outer index must be >= 0, got {t}")
        return self.rounds

    def text(self) -> str:
        return str(self.rounds)


@dataclass(frozen=True)
class AffineCappedSchedule:
    """Budget ``min(ceil(slope*t + intercept), cap)`` with 0-based outer index.

    Nondecreasing in t (slope >= 0), so later outer iterations get at least
    as many consensus rounds as earlier ones.
    """

    slope: float
    intercept: float
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.slope < 0:
            raise ValueError(f"slope must be >= 0, got {self.slope}")
        if math.ceil(self.intercept) < 1:
            raise ValueError(f"intercept must evaluate to >= 1, got {self.intercept}")
        if self.cap < 1:
            raise ValueError(f"cap must be >= 1, got {self.cap}")

    def rounds_for(self, t: int) -> int:
        if t < 0:
            raise ValueError(f"outer index must be >= 0, got {t}")
        return min(math.ceil(self.slope * t + self.intercept), self.cap)

    def text(self) -> str:
        def num(x: float) -> str:
            return str(int(x)) if float(x).is_integer() else repr(x)

        return f"min({num(self.slope)}t+{num(self.intercept)},{self.cap})"


Schedule = FixedSchedule | AffineCappedSchedule

_AFFINE_RE = re.compile(
    r"^(?:(?P<slope>\d+(?:\.\d+)?)\s*\*?\s*)?t\s*\+\s*(?P<intercept>\d+(?:\.\d+)?)$"
)


def parse_schedule(text: str, default_cap: int = DEFAULT_CAP) -> Schedule:
    """Parse schedule text: ``"50"``, ``"2t+1"``, ``"min(5t+1,200)"``.

    Bare affine forms get the default cap; ceiling brackets around an
    affine form are accepted and ignored (ceiling is always applied).
    """
    s = text.strip().replace(" ", "")
    cap = default_cap
    m = re.match(r"^min\((?P<body>.+),(?P<cap>\d+)\)$", s)
    if m:
        cap = int(m.group("cap"))
        s = m.group("body")
    s = s.removeprefix("ceil(").removesuffix(")") if s.startswith("ceil(") else s
    if re.fullmatch(r"\d+", s):
        fixed = int(s)
        if m:  # min(C, cap) written explicitly
            return FixedSchedule(min(fixed, cap))
        return FixedSchedule(fixed)
    am = _AFFINE_RE.match(s)
    if not am:
        raise ParseError(f"cannot parse schedule {text!r}")
    return AffineCappedSchedule(float(am.group("slope") or 1.0),
                                float(am.group("intercept")), cap)


def schedule_eval(schedule: Schedule, t: int) -> int:
    """Consensus budget for outer iteration t (0-based)."""
    return schedule.rounds_for(t)


def apply_round(mats: list[np.ndarray], weights: WeightMatrix) -> list[np.ndarray]:
    """One bulk-synchronous consensus round (double-buffered)."""
    w = weights.w
    topo = weights.topology
    out = []
    for i in range(topo.n):
        acc = w[i, i] * mats[i]
        for j in topo.peers(i):
            acc += w[i, j] * mats[j]
        out.append(acc)
    return out


def iterate_rounds(mats: list[np.ndarray], weights: WeightMatrix,
                   rounds: int) -> list[np.ndarray]:
    for _ in range(rounds):
        mats = apply_round(mats, weights)
    return mats


def scale_vector(weights: WeightMatrix, rounds: int) -> np.ndarray:
    """The per-node divisors ``[W^rounds e_1]_i`` for scaled-sum recovery.

    Computed analytically from the known weight matrix; nothing is
    transmitted for this.
    """
    v = np.zeros(weights.n)
    v[0] = 1.0
    for _ in range(rounds):
        v = weights.w @ v
    return v


@dataclass(frozen=True)
class ConsensusOutcome:
    """State after a fixed number of consensus rounds on per-node matrices."""

    matrices: tuple[np.ndarray, ...]
    scales: np.ndarray
    rounds_used: int
    messages: np.ndarray  # per-node send counts

    def scaled_estimates(self) -> list[np.ndarray]:
        """Per-node estimates of the SUM of the initial matrices.

        A node the length-``rounds_used`` walk from node 0 has not reached
        yet has scale 0; its estimate is undefined and comes back infinite.
        """
        with np.errstate(divide="ignore", invalid="ignore"):
            return [m / s for m, s in zip(self.matrices, self.scales)]


def consensus_sum(initial: list[np.ndarray], weights: WeightMatrix,
                  rounds: int) -> ConsensusOutcome:
    """Run the averaging iteration and expose scaled-sum estimates.

    Each node sends one message per neighbor per round, so node i sends
    ``deg(i) * rounds`` messages in total.
    """
    mats = check_same_shape(initial, "initial")
    if len(mats) != weights.n:
        raise ShapeMismatch(
            f"{len(mats)} node matrices for a {weights.n}-node weight matrix"
        )
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    final = iterate_rounds(mats, weights, rounds)
    return ConsensusOutcome(
        matrices=tuple(final),
        scales=scale_vector(weights, rounds),
        rounds_used=rounds,
        messages=weights.topology.degrees() * rounds,
    )


def absolute_sum_norm(initial: list[np.ndarray]) -> float:
    """Frobenius norm of the entrywise sum of absolute values over nodes."""
    mats = check_same_shape(initial, "initial")
    acc = np.zeros_like(mats[0])
    for m in mats:
        acc += np.abs(m)
    return float(np.linalg.norm(acc))


def consensus_error_bound_check(outcome: ConsensusOutcome, exact_sum,
                                z_prime_norm: float, delta: float) -> bool:
    """True iff every node's scaled estimate is within ``delta * z_prime_norm``
    of the exact sum in Frobenius norm.  Undefined (non-finite) estimates
    count as violations."""
    exact = np.asarray(exact_sum, dtype=np.float64)
    for est in outcome.scaled_estimates():
        err = float(np.linalg.norm(est - exact)) if np.isfinite(est).all() else np.inf
        if err > delta * z_prime_norm:
            return False
    return True
