"""Statistics over a finished run: delay CDFs, throughput, queue stability."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from bufrelay.errors import DomainError, EmptyResultError

MIN_STABILITY_SLOTS = 2000
DEFAULT_DRIFT_FRACTION = 0.01  # of a packet, per slot

TRACE_COLUMNS = ("slot", "q_bs_bits", "q_relay_bits", "delivered_bits_cum")
CDF_COLUMNS = ("delay_ms", "cum_prob")


@dataclass
class MetricsRecord:
    """Per-slot traces (index ``k`` is slot ``k + 1``) and per-packet outcomes.

    ``delivery_slots`` holds -1 for packets still queued at the horizon.
    Packet arrays are empty for saturated traffic (``delays_valid`` False).
    """

    mode: str
    seed: int
    slot_duration_s: float
    packet_size_bits: float
    q_bs: np.ndarray
    q_relay: np.ndarray
    arrived_bits_cum: np.ndarray
    forwarded_bits_cum: np.ndarray
    delivered_bits_cum: np.ndarray
    arrival_slots: np.ndarray
    delivery_slots: np.ndarray
    packet_sizes: np.ndarray
    arrived_packets: int
    delays_valid: bool = True
    config: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return int(self.q_bs.size)

    @property
    def delivered_mask(self) -> np.ndarray:
        return self.delivery_slots > 0

    @property
    def delivered_packets(self) -> int:
        return int(np.count_nonzero(self.delivered_mask))

    @property
    def censored_packets(self) -> int:
        return int(self.arrival_slots.size - self.delivered_packets)

    def delay_samples(self, warmup_slots: int = 0) -> np.ndarray:
        """End-to-end delays in slots of delivered packets that arrived after warm-up."""
        mask = self.delivered_mask & (self.arrival_slots > warmup_slots)
        return (self.delivery_slots[mask] - self.arrival_slots[mask]).astype(np.int64)

    def delivered_per_slot(self) -> np.ndarray:
        return np.diff(self.delivered_bits_cum, prepend=0.0)

    def conservation_error(self) -> np.ndarray:
        """Per-slot ``arrived - (q_bs + q_relay + delivered)`` in bits."""
        return self.arrived_bits_cum - (self.q_bs + self.q_relay + self.delivered_bits_cum)


def _as_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise EmptyResultError("no delay samples")
    return arr


def delay_cdf(samples, slot_duration_s: float = 1e-3) -> list[tuple[float, float]]:
    """Empirical CDF as ``(delay_ms, P[delay <= delay_ms])`` at each distinct delay."""
    arr = _as_samples(samples)
    values, counts = np.unique(arr, return_counts=True)
    cum = np.cumsum(counts)
    n = cum[-1]
    ms = values * slot_duration_s * 1e3
    probs = cum / n
    probs[-1] = 1.0
    return [(float(d), float(p)) for d, p in zip(ms, probs)]


def mean_delay(samples, slot_duration_s: float = 1e-3) -> float:
    """Mean delay in milliseconds."""
    return float(_as_samples(samples).mean() * slot_duration_s * 1e3)


@dataclass(frozen=True)
class Throughput:
    packets: int
    slots: int
    duration_s: float
    bits: float

    @property
    def packets_per_s(self) -> float:
        return self.packets / self.duration_s

    @property
    def bits_per_slot(self) -> float:
        return self.bits / self.slots


def throughput(record: MetricsRecord, window: tuple[int, int] | None = None) -> Throughput:
    """Deliveries whose last bit is served in slots ``window = (first, last)``, inclusive."""
    first, last = (1, record.horizon) if window is None else window
    if not 1 <= first <= last <= record.horizon:
        if first > last:
            raise EmptyResultError(f"empty window {window!r}")
        raise DomainError(f"window {window!r} outside 1..{record.horizon}")
    served = record.delivery_slots - 1
    packets = int(np.count_nonzero((served >= first) & (served <= last)))
    cum = record.delivered_bits_cum
    bits = float(cum[last - 1] - (cum[first - 2] if first > 1 else 0.0))
    slots = last - first + 1
    return Throughput(packets=packets, slots=slots, duration_s=slots * record.slot_duration_s, bits=bits)


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    slope_bits_per_slot: float
    relative_drift: float  # slope / mean occupancy over the first half
    threshold_bits_per_slot: float

    @property
    def label(self) -> str:
        return "Stable" if self.stable else "Unstable"


def stability_classify(
    trace,
    packet_size_bits: float = 1000.0,
    threshold_bits_per_slot: float | None = None,
    min_slots: int = MIN_STABILITY_SLOTS,
) -> StabilityVerdict:
    """Flag sustained growth from the least-squares slope over the last half.

    Unstable when the slope exceeds the threshold, by default 1% of a packet
    per slot.
    """
    q = np.asarray(trace, dtype=float)
    if q.size < min_slots:
        raise DomainError(f"need >= {min_slots} slots to judge stability, got {q.size}")
    if threshold_bits_per_slot is None:
        threshold_bits_per_slot = DEFAULT_DRIFT_FRACTION * packet_size_bits
    half = q.size // 2
    tail = q[half:]
    x = np.arange(tail.size, dtype=float)
    x -= x.mean()
    slope = float(np.dot(x, tail - tail.mean()) / np.dot(x, x))
    base = float(q[:half].mean())
    if base > 0:
        relative = slope / base
    else:
        relative = 0.0 if slope <= 0 else float("inf")
    return StabilityVerdict(
        stable=not slope > threshold_bits_per_slot,
        slope_bits_per_slot=slope,
        relative_drift=float(relative),
        threshold_bits_per_slot=float(threshold_bits_per_slot),
    )


def summarize(
    record: MetricsRecord,
    warmup_slots: int = 0,
    drift_threshold_bits_per_slot: float | None = None,
) -> dict:
    """JSON-ready per-run summary."""
    out: dict = {
        "mode": record.mode,
        "seed": record.seed,
        "horizon_slots": record.horizon,
        "arrived_packets": int(record.arrived_packets),
        "delivered_bits": float(record.delivered_bits_cum[-1]),
    }
    tp = throughput(record)
    out["throughput_bits_per_slot"] = tp.bits_per_slot
    if record.delays_valid:
        out["delivered_packets"] = record.delivered_packets
        out["censored_packets"] = record.censored_packets
        out["throughput_pps"] = tp.packets_per_s
        samples = record.delay_samples(warmup_slots)
        out["mean_delay_ms"] = mean_delay(samples, record.slot_duration_s) if samples.size else None
    if record.horizon >= MIN_STABILITY_SLOTS:
        for name, trace in (("bs", record.q_bs), ("relay", record.q_relay)):
            v = stability_classify(trace, record.packet_size_bits, drift_threshold_bits_per_slot)
            out[f"stability_{name}"] = v.label
            out[f"drift_{name}_bits_per_slot"] = v.slope_bits_per_slot
    return out


def _comment_header(fh, meta: dict) -> None:
    fh.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")


def write_trace_csv(record: MetricsRecord, path: str | Path) -> None:
    """One row per slot; first line is a ``#`` comment echoing seed and config."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        _comment_header(fh, {"seed": record.seed, "config": record.config})
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for k in range(record.horizon):
            w.writerow(
                (
                    k + 1,
                    repr(float(record.q_bs[k])),
                    repr(float(record.q_relay[k])),
                    repr(float(record.delivered_bits_cum[k])),
                )
            )


def write_cdf_csv(points: list[tuple[float, float]], path: str | Path, meta: dict) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        _comment_header(fh, meta)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CDF_COLUMNS)
        for d, p in points:
            w.writerow((repr(d), repr(p)))
