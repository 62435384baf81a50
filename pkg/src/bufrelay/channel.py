"""Per-slot link realizations: pathloss, block fading, SNR and achievable rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bufrelay.errors import DomainError

RAYLEIGH = "rayleigh"
RICIAN = "rician"


def dbm_to_mw(dbm):
    return np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(np.asarray(mw, dtype=float))


@dataclass(frozen=True)
class FadingModel:
    """Unit-mean power fading.

    ``rician_k_db`` is the line-of-sight to scattered power ratio in dB and is
    required for Rician fading; ``math.inf`` gives a pure line-of-sight link.
    """

    kind: str = RAYLEIGH
    rician_k_db: float | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind == RAYLEIGH:
            if self.rician_k_db is not None:
                raise DomainError("rician_k_db applies only to Rician fading")
        elif kind == RICIAN:
            if self.rician_k_db is None or math.isnan(self.rician_k_db):
                raise DomainError("Rician fading needs a K factor in dB")
            if self.rician_k_db == -math.inf:
                raise DomainError("Rician K factor must be > 0 in linear scale")
        else:
            raise DomainError(f"unknown fading kind {self.kind!r}")

    @classmethod
    def rayleigh(cls) -> FadingModel:
        return cls(RAYLEIGH)

    @classmethod
    def rician(cls, k_db: float) -> FadingModel:
        return cls(RICIAN, float(k_db))

    @property
    def k_linear(self) -> float | None:
        if self.kind != RICIAN:
            return None
        return 10.0 ** (self.rician_k_db / 10.0)


@dataclass(frozen=True)
class LinkBudget:
    """Static parameters of one hop.

    Pathloss follows ``A + B*log10(d_km)``.  Power and noise figures are per
    the simulated bandwidth.
    """

    tx_power_dbm: float
    distance_m: float
    pathloss_a_db: float
    pathloss_b: float
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 180e3

    def __post_init__(self):
        if not self.distance_m > 0:
            raise DomainError(f"distance_m must be > 0, got {self.distance_m!r}")
        if not self.bandwidth_hz > 0:
            raise DomainError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz!r}")


@dataclass(frozen=True)
class LinkRealization:
    gain_linear: float
    snr_linear: float
    rate_bits_full_slot: float


def pathloss_db(budget: LinkBudget) -> float:
    if not budget.distance_m > 0:
        raise DomainError(f"distance_m must be > 0, got {budget.distance_m!r}")
    return budget.pathloss_a_db + budget.pathloss_b * math.log10(budget.distance_m / 1000.0)


def noise_power_dbm(noise_psd_dbm_hz: float, bandwidth_hz: float) -> float:
    if not bandwidth_hz > 0:
        raise DomainError(f"bandwidth_hz must be > 0, got {bandwidth_hz!r}")
    return noise_psd_dbm_hz + 10.0 * math.log10(bandwidth_hz)


def mean_snr_db(budget: LinkBudget) -> float:
    """SNR at unit fading gain."""
    return (
        budget.tx_power_dbm
        - pathloss_db(budget)
        - noise_power_dbm(budget.noise_psd_dbm_hz, budget.bandwidth_hz)
    )


def rate_bits(snr_linear, bandwidth_hz: float, slot_duration_s: float):
    """Shannon rate over a whole slot, in bits."""
    return bandwidth_hz * slot_duration_s * np.log2(1.0 + np.asarray(snr_linear, dtype=float))


def draw_fading_gain(model: FadingModel, rng: np.random.Generator, size=None):
    """Power gain ``|h|^2`` with unit mean; scalar when ``size`` is None."""
    if model.kind == RAYLEIGH:
        return rng.exponential(1.0, size)
    k = model.k_linear
    if math.isinf(k):
        return 1.0 if size is None else np.ones(size)
    los = math.sqrt(k / (k + 1.0))
    sigma = math.sqrt(1.0 / (2.0 * (k + 1.0)))  # per real dimension
    re = los + sigma * rng.standard_normal(size)
    im = sigma * rng.standard_normal(size)
    return re * re + im * im


def link_from_gain(budget: LinkBudget, gain: float, slot_duration_s: float) -> LinkRealization:
    if gain < 0:
        raise DomainError(f"fading gain must be >= 0, got {gain!r}")
    snr = 10.0 ** (mean_snr_db(budget) / 10.0) * gain
    rate = float(rate_bits(snr, budget.bandwidth_hz, slot_duration_s))
    return LinkRealization(gain_linear=float(gain), snr_linear=float(snr), rate_bits_full_slot=rate)


def realize_link(
    budget: LinkBudget, model: FadingModel, slot_duration_s: float, rng: np.random.Generator
) -> LinkRealization:
    if not slot_duration_s > 0:
        raise DomainError(f"slot_duration_s must be > 0, got {slot_duration_s!r}")
    return link_from_gain(budget, float(draw_fading_gain(model, rng)), slot_duration_s)


def realize_link_series(
    budget: LinkBudget,
    model: FadingModel,
    slot_duration_s: float,
    rng: np.random.Generator,
    n_slots: int,
) -> np.ndarray:
    """Full-slot rates (bits) for ``n_slots`` independent block-fading slots."""
    if not slot_duration_s > 0:
        raise DomainError(f"slot_duration_s must be > 0, got {slot_duration_s!r}")
    gains = draw_fading_gain(model, rng, n_slots)
    snr = 10.0 ** (mean_snr_db(budget) / 10.0) * gains
    return rate_bits(snr, budget.bandwidth_hz, slot_duration_s)


def bernoulli_realize(p: float, rng: np.random.Generator) -> bool:
    """True (Good) with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p!r}")
    return bool(rng.random() < p)


def bernoulli_series(p: float, rng: np.random.Generator, n_slots: int) -> np.ndarray:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p!r}")
    return rng.random(n_slots) < p
