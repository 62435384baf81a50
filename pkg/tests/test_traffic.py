import math

import numpy as np
import pytest

from bufrelay.errors import DomainError
from bufrelay.traffic import (
    DeterministicBits,
    Poisson,
    Saturated,
    arrival_counts,
    arrivals_for_slot,
)


def test_deterministic_stream_stops_after_n():
    model = DeterministicBits(5)
    assert arrivals_for_slot(model, 6, 1e-3) == []
    (pkt,) = arrivals_for_slot(model, 5, 1e-3, first_id=4)
    assert (pkt.id, pkt.arrival_slot, pkt.size_bits) == (4, 5, 1.0)


def test_zero_rate_poisson_is_silent():
    rng = np.random.default_rng(0)
    assert all(arrivals_for_slot(Poisson(0.0), t, 1e-3, rng) == [] for t in range(1, 100))


def test_poisson_count_over_a_million_slots():
    total = int(arrival_counts(Poisson(50.0), 10**6, 1e-3, np.random.default_rng(4)).sum())
    assert abs(total - 50_000) <= 3 * math.sqrt(50_000)


def test_poisson_packets_are_stamped_with_their_slot():
    rng = np.random.default_rng(8)
    pkts = arrivals_for_slot(Poisson(5000.0, 1000.0), 7, 1e-3, rng, first_id=10)
    assert pkts and all(p.arrival_slot == 7 and p.size_bits == 1000.0 for p in pkts)
    assert [p.id for p in pkts] == list(range(10, 10 + len(pkts)))


def test_vector_counts_match_slot_by_slot_draws():
    model = Poisson(120.0)
    seq_rng = np.random.default_rng(21)
    seq = [len(arrivals_for_slot(model, t, 1e-3, seq_rng)) for t in range(1, 5001)]
    vec = arrival_counts(model, 5000, 1e-3, np.random.default_rng(21))
    assert seq == vec.tolist()


def test_saturated_topup():
    model = Saturated(packet_size_bits=1.0)
    assert len(arrivals_for_slot(model, 1, 1e-3, backlog_bits=0.0)) == 1
    assert arrivals_for_slot(model, 1, 1e-3, backlog_bits=3.0) == []
    deep = Saturated(packet_size_bits=100.0, backlog_bits=1000.0)
    assert deep.topup_packets(150.0) == 9


@pytest.mark.parametrize(
    "factory", [lambda: DeterministicBits(0), lambda: Poisson(-1.0), lambda: Poisson(5.0, 0.5), lambda: Saturated(0.0)]
)
def test_model_validation(factory):
    with pytest.raises(DomainError):
        factory()


def test_slot_index_must_be_positive():
    with pytest.raises(DomainError):
        arrivals_for_slot(DeterministicBits(3), 0, 1e-3)
