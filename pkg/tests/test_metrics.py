import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bufrelay.analytic import ChannelProbs
from bufrelay.engine import Mode, ScenarioConfig, run
from bufrelay.errors import DomainError, EmptyResultError
from bufrelay.metrics import (
    MetricsRecord,
    delay_cdf,
    mean_delay,
    stability_classify,
    summarize,
    throughput,
)
from bufrelay.traffic import DeterministicBits


def test_cdf_degenerate():
    assert delay_cdf([1, 1, 1]) == [(1.0, 1.0)]


def test_cdf_by_hand():
    assert delay_cdf([1, 2, 2, 5]) == [(1.0, 0.25), (2.0, 0.75), (5.0, 1.0)]


def test_cdf_converts_slots_to_ms():
    assert delay_cdf([3], slot_duration_s=0.5e-3) == [(1.5, 1.0)]


def test_cdf_of_uninterrupted_deterministic_queue():
    rec = run(ScenarioConfig(Mode.CONVENTIONAL_BERNOULLI, DeterministicBits(20), probs=ChannelProbs(1, 1), horizon_slots=25))
    assert delay_cdf(rec.delay_samples()) == [(1.0, 1.0)]


def test_empty_samples_raise():
    with pytest.raises(EmptyResultError):
        delay_cdf([])
    with pytest.raises(EmptyResultError):
        mean_delay([])


def test_mean_delay_examples():
    assert mean_delay([10, 14]) == pytest.approx(12.0)
    assert mean_delay([1]) == pytest.approx(1.0)


@given(st.lists(st.integers(1, 5000), min_size=1, max_size=300))
def test_cdf_shape_and_mean_identity(samples):
    cdf = delay_cdf(samples)
    xs = [d for d, _ in cdf]
    ps = [p for _, p in cdf]
    assert xs == sorted(set(xs))
    assert all(0 < p <= 1 for p in ps)
    assert all(b >= a for a, b in zip(ps, ps[1:]))
    assert ps[-1] == 1.0
    # E[X] = integral over x >= 0 of (1 - F(x)) for non-negative X
    area, prev_x, prev_p = 0.0, 0.0, 0.0
    for x, p in cdf:
        area += (x - prev_x) * (1 - prev_p)
        prev_x, prev_p = x, p
    assert mean_delay(samples) == pytest.approx(area, rel=1e-9)


def _record(delivery_slots, horizon=10_000, size=1000.0):
    delivery_slots = np.asarray(delivery_slots, dtype=np.int64)
    n = delivery_slots.size
    delivered = np.zeros(horizon)
    for d in delivery_slots[delivery_slots > 0]:
        delivered[d - 2 :] += size
    return MetricsRecord(
        mode="buffered_fading",
        seed=0,
        slot_duration_s=1e-3,
        packet_size_bits=size,
        q_bs=np.zeros(horizon),
        q_relay=np.zeros(horizon),
        arrived_bits_cum=np.full(horizon, n * size),
        forwarded_bits_cum=delivered.copy(),
        delivered_bits_cum=delivered,
        arrival_slots=np.ones(n, dtype=np.int64),
        delivery_slots=delivery_slots,
        packet_sizes=np.full(n, size),
        arrived_packets=n,
    )


def test_throughput_zero_and_fifty_per_second():
    assert throughput(_record([])).packets_per_s == 0.0
    rec = _record(np.linspace(2, 10_001, 500).astype(int))
    tp = throughput(rec)
    assert tp.packets_per_s == pytest.approx(50.0)
    assert tp.packets_per_s * tp.duration_s == tp.packets == 500


def test_throughput_window_counts_exactly():
    rec = _record([2, 3, 50, 51, 9000])
    tp = throughput(rec, (2, 50))  # served in slots 2..50
    assert tp.packets == 3
    assert tp.packets_per_s * tp.duration_s == pytest.approx(tp.packets)
    assert tp.bits_per_slot == pytest.approx(3000.0 / 49)
    with pytest.raises(EmptyResultError):
        throughput(rec, (10, 5))
    with pytest.raises(DomainError):
        throughput(rec, (0, 10))


def test_stability_constant_and_linear():
    flat = stability_classify(np.full(4000, 7000.0))
    assert flat.stable and flat.slope_bits_per_slot == pytest.approx(0.0, abs=1e-12)
    ramp = stability_classify(100.0 * np.arange(1, 4001))
    assert not ramp.stable
    assert ramp.slope_bits_per_slot == pytest.approx(100.0)


def test_stability_threshold_is_one_percent_of_a_packet():
    t = np.arange(4000, dtype=float)
    assert stability_classify(9.0 * t).stable
    assert not stability_classify(11.0 * t).stable
    assert not stability_classify(11.0 * t, packet_size_bits=1.0).stable
    assert stability_classify(11.0 * t, threshold_bits_per_slot=20.0).stable


def test_stability_needs_enough_slots():
    with pytest.raises(DomainError):
        stability_classify(np.zeros(1999))


def test_summary_reports_censored_packets():
    s = summarize(_record([5, 7, -1]))
    assert s["delivered_packets"] == 2
    assert s["censored_packets"] == 1
    assert s["mean_delay_ms"] == pytest.approx(5.0)
    assert s["stability_bs"] == "Stable"
