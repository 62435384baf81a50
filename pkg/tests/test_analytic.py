import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bufrelay.analytic import (
    ChannelProbs,
    InactiveSlotSet,
    deterministic_delivery_slot,
    interruption_prob_conventional,
    joint_state_probs,
    queueing_delay,
    solve_buffered_bernoulli_chain,
)
from bufrelay.errors import DomainError
from oracles import single_server_delivery

probs = st.floats(0.0, 1.0, allow_nan=False)
open_probs = st.floats(0.01, 0.99)


@pytest.mark.parametrize(
    "p1, p2, expected",
    [
        (1.0, 1.0, (1.0, 0.0, 0.0, 0.0)),
        (0.5, 0.5, (0.25, 0.25, 0.25, 0.25)),
        (0.8, 0.9, (0.72, 0.08, 0.18, 0.02)),
    ],
)
def test_joint_state_probs_examples(p1, p2, expected):
    d = joint_state_probs(ChannelProbs(p1, p2))
    assert (d.p_gg, d.p_gb, d.p_bg, d.p_bb) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("p1, p2, q", [(1.0, 1.0, 0.0), (0.0, 0.3, 1.0), (0.8, 0.9, 0.28)])
def test_interruption_prob_conventional_examples(p1, p2, q):
    assert interruption_prob_conventional(ChannelProbs(p1, p2)) == pytest.approx(q, abs=1e-15)


@pytest.mark.parametrize("p1, p2", [(-0.1, 0.5), (0.5, 1.01), (float("nan"), 0.5)])
def test_channel_probs_rejects_out_of_range(p1, p2):
    with pytest.raises(DomainError):
        ChannelProbs(p1, p2)


@given(probs, probs)
def test_joint_states_sum_to_one_and_match_interruption(p1, p2):
    p = ChannelProbs(p1, p2)
    d = joint_state_probs(p)
    assert d.total() == pytest.approx(1.0, abs=1e-12)
    assert interruption_prob_conventional(p) == pytest.approx(d.p_gb + d.p_bg + d.p_bb, abs=1e-12)


def test_delivery_slot_without_interruptions():
    assert deterministic_delivery_slot(5, InactiveSlotSet()) == 6
    assert [deterministic_delivery_slot(i, ()) for i in range(1, 5)] == [2, 3, 4, 5]


def test_delivery_slot_first_slot_idle():
    assert deterministic_delivery_slot(1, {1}) == 3


def test_delivery_slot_counts_idle_slots_while_queued():
    # Slot 9 idles while bit 7 is still waiting, so it costs bit 7 a slot too.
    assert single_server_delivery(10, {2, 3, 9})[7] == 11
    assert deterministic_delivery_slot(7, {2, 3, 9}) == 11
    assert deterministic_delivery_slot(1, {1, 2}) == 4


def test_delivery_slot_domain_errors():
    with pytest.raises(DomainError):
        deterministic_delivery_slot(0, ())
    with pytest.raises(DomainError):
        InactiveSlotSet([0, 3])


@settings(max_examples=300, deadline=None)
@given(
    n=st.integers(1, 300),
    inactive=st.sets(st.integers(1, 400), max_size=120),
)
def test_delivery_slot_matches_slot_by_slot_queue(n, inactive):
    truth = single_server_delivery(n, inactive)
    slots = InactiveSlotSet(inactive)
    for i in range(1, n + 1):
        assert deterministic_delivery_slot(i, slots) == truth[i]


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 200), inactive=st.sets(st.integers(1, 250), max_size=60))
def test_literal_count_agrees_when_no_idle_slot_follows_arrival(n, inactive):
    slots = InactiveSlotSet(inactive)
    for i in range(1, n + 1):
        literal = slots.count_through(i)
        if not any(i < x <= i + literal for x in slots):
            assert queueing_delay(i, slots) == literal


def _detailed_balance_delivery(p1, p2, cap):
    # Birth-death chain: pi[q+1] * down(q+1) = pi[q] * up(q).
    up = [p1 * (1 - p2)] * cap
    down = [(1 - p1) * p2] * cap
    down[-1] = p2  # from a full relay nothing arrives
    pi = [1.0]
    for q in range(cap):
        pi.append(pi[-1] * up[q] / down[q])
    total = sum(pi)
    pi = [x / total for x in pi]
    return pi[0] * p1 * p2 + (1 - pi[0]) * p2


def test_chain_perfect_links_deliver_every_slot():
    sol = solve_buffered_bernoulli_chain(ChannelProbs(1.0, 1.0), 10)
    assert sol.delivery_prob == pytest.approx(1.0, abs=1e-12)
    assert sol.stationary[0] == pytest.approx(1.0)


@pytest.mark.parametrize("p1, p2", [(0.8, 0.9), (0.5, 0.5)])
def test_chain_beats_conventional(p1, p2):
    sol = solve_buffered_bernoulli_chain(ChannelProbs(p1, p2), 64)
    assert sol.delivery_prob > p1 * p2


@settings(max_examples=60, deadline=None)
@given(open_probs, open_probs, st.integers(1, 80))
def test_chain_matches_detailed_balance(p1, p2, cap):
    sol = solve_buffered_bernoulli_chain(ChannelProbs(p1, p2), cap)
    assert sol.stationary.sum() == pytest.approx(1.0, abs=1e-12)
    assert sol.delivery_prob == pytest.approx(_detailed_balance_delivery(p1, p2, cap), rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(open_probs, open_probs, st.integers(8, 80))
def test_buffered_interruption_strictly_below_conventional(p1, p2, cap):
    p = ChannelProbs(p1, p2)
    q_b = solve_buffered_bernoulli_chain(p, cap).interruption_prob
    assert q_b < interruption_prob_conventional(p)


@settings(max_examples=60, deadline=None)
@given(open_probs, open_probs, st.floats(0.0, 0.5))
def test_chain_delivery_monotone_in_both_probabilities(p1, p2, bump):
    base = solve_buffered_bernoulli_chain(ChannelProbs(p1, p2)).delivery_prob
    up1 = solve_buffered_bernoulli_chain(ChannelProbs(min(p1 + bump, 1.0), p2)).delivery_prob
    up2 = solve_buffered_bernoulli_chain(ChannelProbs(p1, min(p2 + bump, 1.0))).delivery_prob
    assert up1 >= base - 1e-12
    assert up2 >= base - 1e-12


@pytest.mark.parametrize("cap", [0, -3, 2.5])
def test_chain_rejects_bad_cap(cap):
    with pytest.raises(DomainError):
        solve_buffered_bernoulli_chain(ChannelProbs(0.5, 0.5), cap)


def test_chain_degenerate_corners():
    assert solve_buffered_bernoulli_chain(ChannelProbs(0.0, 0.7), 5).delivery_prob == 0.0
    assert solve_buffered_bernoulli_chain(ChannelProbs(0.7, 0.0), 5).delivery_prob == 0.0
    sol = solve_buffered_bernoulli_chain(ChannelProbs(1.0, 0.0), 5)
    assert sol.stationary[-1] == pytest.approx(1.0)
