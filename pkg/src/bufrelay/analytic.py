"""Closed-form results for the Bernoulli relay model and the single-server queue.

Covers the deterministic one-bit-per-slot queue (delivery slot of every bit
given the slots in which the server was idle), the product-form joint channel
state distribution, the interruption probability of conventional relaying,
and a finite Markov chain for buffered relaying under a saturated source.
"""

from __future__ import annotations

from bisect import bisect_right
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from bufrelay.errors import DomainError, NumericError

DEFAULT_CHAIN_CAP = 64


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class ChannelProbs:
    """Per-slot probabilities that each hop is Good.

    ``p1`` is the BS->relay link, ``p2`` the relay->user link.
    """

    p1: float
    p2: float

    def __post_init__(self):
        object.__setattr__(self, "p1", _check_prob("p1", self.p1))
        object.__setattr__(self, "p2", _check_prob("p2", self.p2))


@dataclass(frozen=True)
class JointStateDistribution:
    p_gg: float
    p_gb: float
    p_bg: float
    p_bb: float

    def as_dict(self) -> dict[str, float]:
        return {"GG": self.p_gg, "GB": self.p_gb, "BG": self.p_bg, "BB": self.p_bb}

    def total(self) -> float:
        return self.p_gg + self.p_gb + self.p_bg + self.p_bb


def joint_state_probs(p: ChannelProbs) -> JointStateDistribution:
    p1, p2 = p.p1, p.p2
    return JointStateDistribution(
        p_gg=p1 * p2,
        p_gb=p1 * (1.0 - p2),
        p_bg=(1.0 - p1) * p2,
        p_bb=(1.0 - p1) * (1.0 - p2),
    )


def interruption_prob_conventional(p: ChannelProbs) -> float:
    """Probability that the conventional relay delivers nothing in a slot.

    Without a relay buffer the end-to-end server works only when both hops
    are Good, so it is interrupted with probability ``1 - p1*p2``.
    """
    return 1.0 - p.p1 * p.p2


class InactiveSlotSet:
    """Sorted set of 1-based slots in which the overall server is idle."""

    __slots__ = ("slots",)

    def __init__(self, slots: Iterable[int] = ()):
        ordered = sorted(set(int(s) for s in slots))
        if ordered and ordered[0] < 1:
            raise DomainError(f"slot indices must be >= 1, got {ordered[0]}")
        self.slots: tuple[int, ...] = tuple(ordered)

    def count_through(self, t: int) -> int:
        """Number of idle slots ``x <= t``."""
        return bisect_right(self.slots, t)

    def __contains__(self, t: object) -> bool:
        i = bisect_right(self.slots, t) - 1  # type: ignore[arg-type]
        return i >= 0 and self.slots[i] == t

    def __len__(self) -> int:
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots)

    def __repr__(self) -> str:
        return f"InactiveSlotSet({list(self.slots)!r})"


def queueing_delay(i: int, inactive: InactiveSlotSet | Iterable[int]) -> int:
    """Idle slots endured by bit ``i`` of the one-bit-per-slot stream.

    Bit ``i`` arrives at slot ``i`` and waits one extra slot for every idle
    slot up to and including the slot in which it is finally served.  That
    service slot ``s`` satisfies ``s = i + count(inactive <= s)``; the least
    solution is found by iterating from ``s = i``.  When no idle slot falls in
    ``(i, s]`` this reduces to counting idle slots ``<= i``.
    """
    if i < 1:
        raise DomainError(f"bit index must be >= 1, got {i}")
    if not isinstance(inactive, InactiveSlotSet):
        inactive = InactiveSlotSet(inactive)
    n = inactive.count_through(i)
    while True:
        n_next = inactive.count_through(i + n)
        if n_next == n:
            return n
        n = n_next


def deterministic_delivery_slot(i: int, inactive: InactiveSlotSet | Iterable[int]) -> int:
    """Slot at whose start bit ``i`` reaches the destination: ``i + n_i + 1``."""
    return i + queueing_delay(i, inactive) + 1


@dataclass(frozen=True)
class BufferedChainSolution:
    stationary: np.ndarray  # P(relay holds q bits), q = 0..cap
    delivery_prob: float

    @property
    def interruption_prob(self) -> float:
        return 1.0 - self.delivery_prob


def _buffered_transition_matrix(p1: float, p2: float, cap: int) -> np.ndarray:
    # Subslot A: BS (always backlogged) sends one bit w.p. p1 unless the relay
    # is full.  Subslot B: relay sends one bit w.p. p2 if it holds any,
    # including a bit received in subslot A.
    n = cap + 1
    P = np.zeros((n, n))
    for q in range(n):
        if q < cap:
            P[q, q + 1] += p1 * (1.0 - p2)
            P[q, q] += p1 * p2
            if q > 0:
                P[q, q - 1] += (1.0 - p1) * p2
                P[q, q] += (1.0 - p1) * (1.0 - p2)
            else:
                P[q, q] += 1.0 - p1
        else:
            P[q, q - 1] += p2
            P[q, q] += 1.0 - p2
    return P


def _reachable_from_empty(P: np.ndarray) -> list[int]:
    seen = {0}
    stack = [0]
    while stack:
        s = stack.pop()
        for nxt in np.flatnonzero(P[s] > 0.0):
            nxt = int(nxt)
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return sorted(seen)


def solve_buffered_bernoulli_chain(
    p: ChannelProbs, buffer_cap: int = DEFAULT_CHAIN_CAP
) -> BufferedChainSolution:
    """Stationary relay occupancy and per-slot delivery probability.

    The BS is saturated; the relay starts empty.  States unreachable from the
    empty relay are dropped before solving, which keeps the balance equations
    nonsingular in degenerate corners such as ``p1 = p2 = 1``.
    """
    if int(buffer_cap) != buffer_cap or buffer_cap < 1:
        raise DomainError(f"buffer_cap must be an integer >= 1, got {buffer_cap!r}")
    cap = int(buffer_cap)
    p1, p2 = p.p1, p.p2
    P = _buffered_transition_matrix(p1, p2, cap)

    states = _reachable_from_empty(P)
    sub = P[np.ix_(states, states)]
    k = len(states)
    # pi (P - I) = 0 with one balance equation swapped for sum(pi) = 1.
    A = (sub - np.eye(k)).T
    A[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    try:
        pi_sub = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"balance equations singular for p={p!r}, cap={cap}") from exc
    residual = np.max(np.abs(pi_sub @ sub - pi_sub))
    if not np.all(np.isfinite(pi_sub)) or residual > 1e-9 or pi_sub.min() < -1e-9:
        raise NumericError(f"stationary solve did not converge (residual {residual:.3g})")

    pi = np.zeros(cap + 1)
    pi[states] = np.clip(pi_sub, 0.0, None)
    pi /= pi.sum()

    deliver_given_q = np.full(cap + 1, p2)
    deliver_given_q[0] = p1 * p2
    return BufferedChainSolution(stationary=pi, delivery_prob=float(pi @ deliver_given_q))
