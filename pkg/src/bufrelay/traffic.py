"""Arrival processes feeding the BS buffer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from bufrelay.errors import DomainError


@dataclass
class Packet:
    id: int
    arrival_slot: int
    size_bits: float
    delivery_slot: int | None = None

    @property
    def delay_slots(self) -> int | None:
        if self.delivery_slot is None:
            return None
        return self.delivery_slot - self.arrival_slot


@dataclass(frozen=True)
class DeterministicBits:
    """One 1-bit packet at the start of each slot ``1..n_bits``."""

    n_bits: int

    def __post_init__(self):
        if int(self.n_bits) != self.n_bits or self.n_bits < 1:
            raise DomainError(f"n_bits must be an integer >= 1, got {self.n_bits!r}")

    @property
    def packet_size_bits(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Poisson:
    rate_pps: float
    packet_size_bits: float = 1000.0

    def __post_init__(self):
        if not (self.rate_pps >= 0 and math.isfinite(self.rate_pps)):
            raise DomainError(f"rate_pps must be finite and >= 0, got {self.rate_pps!r}")
        if not self.packet_size_bits >= 1:
            raise DomainError(f"packet_size_bits must be >= 1, got {self.packet_size_bits!r}")

    def mean_per_slot(self, slot_duration_s: float) -> float:
        return self.rate_pps * slot_duration_s


@dataclass(frozen=True)
class Saturated:
    """BS topped up at every slot start so it holds at least ``backlog_bits``.

    ``backlog_bits`` defaults to one packet, enough for Bernoulli links that
    serve at most one bit per slot.  Delay statistics are meaningless here.
    """

    packet_size_bits: float = 1.0
    backlog_bits: float | None = None

    def __post_init__(self):
        if not self.packet_size_bits >= 1:
            raise DomainError(f"packet_size_bits must be >= 1, got {self.packet_size_bits!r}")
        if self.backlog_bits is not None and not self.backlog_bits > 0:
            raise DomainError(f"backlog_bits must be > 0, got {self.backlog_bits!r}")

    @property
    def level_bits(self) -> float:
        return self.packet_size_bits if self.backlog_bits is None else float(self.backlog_bits)

    def topup_packets(self, backlog_bits: float) -> int:
        deficit = self.level_bits - backlog_bits
        if deficit <= 0:
            return 0
        return math.ceil(deficit / self.packet_size_bits)


TrafficModel = Union[DeterministicBits, Poisson, Saturated]


def arrivals_for_slot(
    model: TrafficModel,
    t: int,
    slot_duration_s: float,
    rng: np.random.Generator | None = None,
    *,
    first_id: int = 0,
    backlog_bits: float = 0.0,
) -> list[Packet]:
    """Packets arriving at the start of slot ``t``, ids numbered from ``first_id``.

    ``backlog_bits`` is the current BS occupancy and matters only for
    :class:`Saturated`; ``rng`` is required only for :class:`Poisson`.
    """
    if t < 1:
        raise DomainError(f"slot index must be >= 1, got {t}")
    if isinstance(model, DeterministicBits):
        count = 1 if t <= model.n_bits else 0
    elif isinstance(model, Poisson):
        count = int(rng.poisson(model.mean_per_slot(slot_duration_s))) if model.rate_pps > 0 else 0
    elif isinstance(model, Saturated):
        count = model.topup_packets(backlog_bits)
    else:
        raise DomainError(f"unknown traffic model {model!r}")
    size = float(model.packet_size_bits)
    return [Packet(first_id + k, t, size) for k in range(count)]


def arrival_counts(
    model: DeterministicBits | Poisson,
    n_slots: int,
    slot_duration_s: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Packet counts for slots ``1..n_slots`` drawn in one call.

    Consumes the generator exactly like ``n_slots`` successive
    :func:`arrivals_for_slot` calls would.
    """
    if isinstance(model, DeterministicBits):
        counts = np.zeros(n_slots, dtype=np.int64)
        counts[: min(model.n_bits, n_slots)] = 1
        return counts
    if isinstance(model, Poisson):
        if model.rate_pps == 0:
            return np.zeros(n_slots, dtype=np.int64)
        return rng.poisson(model.mean_per_slot(slot_duration_s), n_slots).astype(np.int64)
    raise DomainError(f"arrival counts are not precomputable for {model!r}")
