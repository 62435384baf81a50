"""Slotted two-hop simulation core.

Every slot runs in a fixed order: arrivals at slot start, then subslot A,
then subslot B.  Queues are fluid FIFO backlogs measured in bits.  Which
packet a bit belongs to is recovered afterwards from cumulative counters:
packet ``k`` owns the bit interval ``(C[k-1], C[k]]`` of the arrival stream,
and it is delivered in the first slot where the cumulative delivered bits
reach ``C[k]``.  The step functions therefore only touch a handful of scalars.

A bit served in slot ``t`` counts as delivered at slot ``t + 1``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from bufrelay.analytic import ChannelProbs
from bufrelay.channel import (
    FadingModel,
    LinkBudget,
    bernoulli_series,
    realize_link_series,
)
from bufrelay.errors import ConfigError
from bufrelay.metrics import MetricsRecord
from bufrelay.traffic import (
    DeterministicBits,
    Packet,
    Poisson,
    Saturated,
    TrafficModel,
    arrival_counts,
)

# Tolerance for deciding that fluid service has covered a packet boundary.
DELIVERY_EPS_BITS = 1e-6


class Mode(str, Enum):
    CONVENTIONAL_BERNOULLI = "conventional_bernoulli"
    BUFFERED_BERNOULLI = "buffered_bernoulli"
    CONVENTIONAL_FADING = "conventional_fading"
    BUFFERED_FADING = "buffered_fading"

    @property
    def buffered(self) -> bool:
        return self in (Mode.BUFFERED_BERNOULLI, Mode.BUFFERED_FADING)

    @property
    def fading(self) -> bool:
        return self in (Mode.CONVENTIONAL_FADING, Mode.BUFFERED_FADING)

    @property
    def relaying(self) -> str:
        return "buffered" if self.buffered else "conventional"

    @classmethod
    def of(cls, relaying: str, channel: str) -> Mode:
        return cls(f"{relaying}_{channel}")


class Link(Enum):
    BS_TO_RELAY = "bs_to_relay"
    RELAY_TO_USER = "relay_to_user"
    IDLE = "idle"


MAXWEIGHT = "maxweight"
FIXED_SUBSLOTS = "fixed"


@dataclass(frozen=True)
class SchedulerPolicy:
    """Subslot allocation for buffered fading relaying.

    ``maxweight`` picks a link per subslot by backlog times rate; with
    ``differential`` the BS->relay weight uses ``(q_bs - q_relay)+``.
    ``fixed`` always gives subslot A to the BS and subslot B to the relay.
    """

    kind: str = MAXWEIGHT
    differential: bool = True

    def __post_init__(self):
        if self.kind not in (MAXWEIGHT, FIXED_SUBSLOTS):
            raise ConfigError("scheduler.kind", f"unknown scheduler {self.kind!r}")


@dataclass
class RelayState:
    """Mutable per-replication state.  All quantities in bits."""

    t: int = 0
    q_bs: float = 0.0
    q_relay: float = 0.0
    arrived_bits: float = 0.0
    forwarded_bits: float = 0.0  # cumulative BS -> relay
    delivered_bits: float = 0.0
    relay_cap: float = math.inf

    def relay_space(self) -> float:
        return self.relay_cap - self.q_relay


def _parse_joint_state(s) -> tuple[bool, bool]:
    if isinstance(s, str):
        s = s.upper()
        if len(s) != 2 or any(c not in "GB" for c in s):
            raise ConfigError("forced_states", f"bad joint state {s!r}; use GG/GB/BG/BB")
        return s[0] == "G", s[1] == "G"
    a, b = s
    return bool(a), bool(b)


@dataclass(frozen=True)
class ScenarioConfig:
    mode: Mode
    traffic: TrafficModel
    horizon_slots: int = 10_000
    slot_duration_s: float = 1e-3
    seed: int = 0
    probs: ChannelProbs | None = None
    hop1: LinkBudget | None = None
    hop2: LinkBudget | None = None
    hop1_fading: FadingModel = field(default_factory=lambda: FadingModel.rician(6.0))
    hop2_fading: FadingModel = field(default_factory=FadingModel.rayleigh)
    scheduler: SchedulerPolicy = field(default_factory=SchedulerPolicy)
    relay_buffer_cap_bits: float = math.inf
    # Bernoulli modes only: joint states per slot ("GB", (True, False), ...)
    # replacing the random draws.  Length must equal the horizon.
    forced_states: tuple | None = None

    def __post_init__(self):
        if self.forced_states is not None:
            pairs = tuple(_parse_joint_state(s) for s in self.forced_states)
            object.__setattr__(self, "forced_states", pairs)

    def validate(self) -> ScenarioConfig:
        mode = Mode(self.mode)
        if int(self.horizon_slots) != self.horizon_slots or self.horizon_slots < 1:
            raise ConfigError("horizon_slots", f"must be an integer >= 1, got {self.horizon_slots!r}")
        if not self.slot_duration_s > 0:
            raise ConfigError("slot_duration_s", f"must be > 0, got {self.slot_duration_s!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed", f"must be a non-negative integer, got {self.seed!r}")
        if not self.relay_buffer_cap_bits > 0:
            raise ConfigError("relay_buffer_cap_bits", "must be > 0")
        if not isinstance(self.traffic, (DeterministicBits, Poisson, Saturated)):
            raise ConfigError("traffic", f"unknown traffic model {self.traffic!r}")
        if mode.fading:
            if self.hop1 is None:
                raise ConfigError("hop1", "fading mode needs a BS->relay link budget")
            if self.hop2 is None:
                raise ConfigError("hop2", "fading mode needs a relay->user link budget")
            if self.forced_states is not None:
                raise ConfigError("forced_states", "only supported in Bernoulli modes")
        else:
            if self.probs is None:
                raise ConfigError("probs", "Bernoulli mode needs channel probabilities")
            if self.forced_states is not None:
                if len(self.forced_states) != self.horizon_slots:
                    raise ConfigError(
                        "forced_states",
                        f"length {len(self.forced_states)} != horizon {self.horizon_slots}",
                    )
        return self

    def with_mode(self, mode: Mode | str) -> ScenarioConfig:
        return replace(self, mode=Mode(mode))

    def to_dict(self) -> dict:
        """JSON-ready echo of every resolved setting."""
        out = {
            "mode": Mode(self.mode).value,
            "horizon_slots": int(self.horizon_slots),
            "slot_duration_s": self.slot_duration_s,
            "seed": int(self.seed),
            "traffic": {"kind": type(self.traffic).__name__.lower(), **asdict(self.traffic)},
            "scheduler": asdict(self.scheduler),
            "relay_buffer_cap_bits": (
                None if math.isinf(self.relay_buffer_cap_bits) else self.relay_buffer_cap_bits
            ),
        }
        if Mode(self.mode).fading:
            out["hop1"] = asdict(self.hop1)
            out["hop2"] = asdict(self.hop2)
            out["hop1_fading"] = asdict(self.hop1_fading)
            out["hop2_fading"] = asdict(self.hop2_fading)
        else:
            out["probs"] = asdict(self.probs)
            if self.forced_states is not None:
                out["forced_states"] = [
                    ("G" if a else "B") + ("G" if b else "B") for a, b in self.forced_states
                ]
        return out


# --------------------------------------------------------------------------
# Per-slot service rules.  Each updates ``state`` in place and returns it.


def step_conventional_bernoulli(state: RelayState, s1: bool, s2: bool) -> RelayState:
    if s1 and s2 and state.q_bs > 0:
        x = min(state.q_bs, 1.0)
        state.q_bs -= x
        state.forwarded_bits += x
        state.delivered_bits += x
    return state


def step_buffered_bernoulli(state: RelayState, s1: bool, s2: bool) -> RelayState:
    if s1 and state.q_bs > 0 and state.q_relay < state.relay_cap:
        x = min(state.q_bs, 1.0, state.relay_space())
        state.q_bs -= x
        state.q_relay += x
        state.forwarded_bits += x
    if s2 and state.q_relay > 0:
        y = min(state.q_relay, 1.0)
        state.q_relay -= y
        state.delivered_bits += y
    return state


def mw_schedule(
    q_bs_bits: float,
    q_relay_bits: float,
    r_br_bits: float,
    r_ru_bits: float,
    differential: bool = True,
) -> Link:
    """Max-Weight link choice for one subslot; ties go to the relay."""
    backlog_1 = max(q_bs_bits - q_relay_bits, 0.0) if differential else q_bs_bits
    w1 = backlog_1 * r_br_bits
    w2 = q_relay_bits * r_ru_bits
    if w1 <= 0.0 and w2 <= 0.0:
        return Link.IDLE
    return Link.RELAY_TO_USER if w2 >= w1 else Link.BS_TO_RELAY


def step_conventional_fading(state: RelayState, r_br: float, r_ru: float) -> RelayState:
    x = min(state.q_bs, 0.5 * min(r_br, r_ru))
    if x > 0:
        state.q_bs -= x
        state.forwarded_bits += x
        state.delivered_bits += x
    return state


def _move(state: RelayState, link: Link, r_br: float, r_ru: float) -> None:
    if link is Link.BS_TO_RELAY:
        x = min(state.q_bs, 0.5 * r_br, state.relay_space())
        if x > 0:
            state.q_bs -= x
            state.q_relay += x
            state.forwarded_bits += x
    elif link is Link.RELAY_TO_USER:
        y = min(state.q_relay, 0.5 * r_ru)
        if y > 0:
            state.q_relay -= y
            state.delivered_bits += y


def step_buffered_fading(
    state: RelayState, r_br: float, r_ru: float, policy: SchedulerPolicy = SchedulerPolicy()
) -> RelayState:
    if policy.kind == FIXED_SUBSLOTS:
        _move(state, Link.BS_TO_RELAY, r_br, r_ru)
        _move(state, Link.RELAY_TO_USER, r_br, r_ru)
        return state
    for _ in range(2):
        r1 = r_br if state.q_relay < state.relay_cap else 0.0
        link = mw_schedule(state.q_bs, state.q_relay, r1, r_ru, policy.differential)
        _move(state, link, r_br, r_ru)
    return state


# --------------------------------------------------------------------------


@dataclass
class NodeQueue:
    """Packets resident at one node in FIFO order.

    ``head_transferred_bits`` of the head packet have already moved
    downstream; ``tail_pending_bits`` of the tail packet have not yet arrived
    (only possible at the relay).
    """

    packets: deque
    head_transferred_bits: float = 0.0
    tail_pending_bits: float = 0.0

    @property
    def occupancy_bits(self) -> float:
        total = sum(p.size_bits for p in self.packets)
        return total - self.head_transferred_bits - self.tail_pending_bits


def node_queue_at(record: MetricsRecord, node: str, t: int) -> NodeQueue:
    """Reconstruct the resident packets of ``node`` ('bs' or 'relay') after slot ``t``."""
    if not record.delays_valid:
        raise ValueError("packet identities are not tracked for saturated traffic")
    k = t - 1
    if node == "bs":
        entered = record.arrived_bits_cum[k]
        left = record.forwarded_bits_cum[k]
    elif node == "relay":
        entered = record.forwarded_bits_cum[k]
        left = record.delivered_bits_cum[k]
    else:
        raise ValueError(f"unknown node {node!r}")
    ends = np.cumsum(record.packet_sizes)
    starts = ends - record.packet_sizes
    eps = DELIVERY_EPS_BITS
    resident = np.flatnonzero((ends > left + eps) & (starts < entered - eps))
    packets = deque(
        Packet(
            int(i),
            int(record.arrival_slots[i]),
            float(record.packet_sizes[i]),
            int(record.delivery_slots[i]) if record.delivery_slots[i] > 0 else None,
        )
        for i in resident
    )
    if not packets:
        return NodeQueue(packets)
    head, tail = resident[0], resident[-1]
    return NodeQueue(
        packets,
        head_transferred_bits=max(left - starts[head], 0.0),
        tail_pending_bits=max(ends[tail] - entered, 0.0),
    )


def _channel_series(config: ScenarioConfig, rng1, rng2, h: int):
    if config.mode.fading:
        r1 = realize_link_series(config.hop1, config.hop1_fading, config.slot_duration_s, rng1, h)
        r2 = realize_link_series(config.hop2, config.hop2_fading, config.slot_duration_s, rng2, h)
        return r1.tolist(), r2.tolist()
    s1 = bernoulli_series(config.probs.p1, rng1, h).tolist()
    s2 = bernoulli_series(config.probs.p2, rng2, h).tolist()
    if config.forced_states is not None:
        s1 = [a for a, _ in config.forced_states]
        s2 = [b for _, b in config.forced_states]
    return s1, s2


def run(config: ScenarioConfig) -> MetricsRecord:
    """Simulate ``config.horizon_slots`` slots; deterministic given the seed.

    Three independent streams are spawned from the seed (traffic, hop 1,
    hop 2), so runs that differ only in relaying mode see identical
    arrivals and channel realizations.
    """
    config = replace(config, mode=Mode(config.mode)).validate()
    mode = config.mode
    h = int(config.horizon_slots)
    ss = np.random.SeedSequence(int(config.seed))
    traffic_rng, hop1_rng, hop2_rng = (np.random.default_rng(s) for s in ss.spawn(3))

    ch1, ch2 = _channel_series(config, hop1_rng, hop2_rng, h)

    traffic = config.traffic
    size = float(traffic.packet_size_bits)
    saturated = isinstance(traffic, Saturated)
    counts = None if saturated else arrival_counts(traffic, h, config.slot_duration_s, traffic_rng).tolist()

    if mode is Mode.CONVENTIONAL_BERNOULLI:
        step = step_conventional_bernoulli
    elif mode is Mode.BUFFERED_BERNOULLI:
        step = step_buffered_bernoulli
    elif mode is Mode.CONVENTIONAL_FADING:
        step = step_conventional_fading
    else:
        policy = config.scheduler

        def step(state, r1, r2):
            return step_buffered_fading(state, r1, r2, policy)

    state = RelayState(relay_cap=float(config.relay_buffer_cap_bits))
    q_bs = [0.0] * h
    q_relay = [0.0] * h
    arrived = [0.0] * h
    forwarded = [0.0] * h
    delivered = [0.0] * h
    n_packets = 0

    for k in range(h):
        state.t = k + 1
        n = traffic.topup_packets(state.q_bs) if saturated else counts[k]
        if n:
            bits = n * size
            state.q_bs += bits
            state.arrived_bits += bits
            n_packets += n
        step(state, ch1[k], ch2[k])
        q_bs[k] = state.q_bs
        q_relay[k] = state.q_relay
        arrived[k] = state.arrived_bits
        forwarded[k] = state.forwarded_bits
        delivered[k] = state.delivered_bits

    delivered_arr = np.asarray(delivered)
    if saturated:
        arrival_slots = np.zeros(0, dtype=np.int64)
        delivery_slots = np.zeros(0, dtype=np.int64)
        sizes = np.zeros(0)
    else:
        counts_arr = np.asarray(counts, dtype=np.int64)
        arrival_slots = np.repeat(np.arange(1, h + 1, dtype=np.int64), counts_arr)
        sizes = np.full(arrival_slots.size, size)
        ends = np.cumsum(sizes)
        # Index of the first slot whose cumulative delivery covers each packet.
        idx = np.searchsorted(delivered_arr, ends - DELIVERY_EPS_BITS, side="left")
        delivery_slots = np.where(idx < h, idx + 2, -1).astype(np.int64)

    return MetricsRecord(
        mode=mode.value,
        seed=int(config.seed),
        slot_duration_s=float(config.slot_duration_s),
        packet_size_bits=size,
        q_bs=np.asarray(q_bs),
        q_relay=np.asarray(q_relay),
        arrived_bits_cum=np.asarray(arrived),
        forwarded_bits_cum=np.asarray(forwarded),
        delivered_bits_cum=delivered_arr,
        arrival_slots=arrival_slots,
        delivery_slots=delivery_slots,
        packet_sizes=sizes,
        arrived_packets=n_packets,
        delays_valid=not saturated,
        config=config.to_dict(),
    )
