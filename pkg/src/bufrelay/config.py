"""Experiment configuration files (TOML).

Every key is optional.  An empty file yields the standard scenario: 1000 m
cell with the relay halfway to a cell-edge user, 1 ms slots, one 180 kHz
resource block, -174 dBm/Hz noise, Rician K = 6 dB on the BS->relay hop,
Rayleigh on relay->user, Poisson traffic of 1000-bit packets, 10000 slots.

Schema (defaults shown)::

    [scenario]
    relaying = "both"             # conventional | buffered | both
    channel = "fading"            # fading | bernoulli
    horizon_slots = 10000
    slot_duration_s = 0.001
    relay_buffer_cap_bits = "unlimited"

    [geometry]
    cell_radius_m = 1000.0
    min_ue_bs_distance_m = 50.0
    relay_distance_m = 500.0
    user_distance_m = 1000.0
    user_angle_deg = 0.0          # BS-centred angle between relay and user
    bs_antenna_height_m = 15.0
    relay_antenna_height_m = 10.0
    user_antenna_height_m = 1.5

    [radio]
    bandwidth_hz = 180000.0
    noise_psd_dbm_hz = -174.0
    bs_tx_power_dbm = -8.0        # per simulated resource block
    relay_tx_power_dbm = -25.0

    [pathloss]                    # PL(dB) = a + b * log10(d_km)
    bs_relay_a_db = 100.7
    bs_relay_b = 23.5
    relay_user_a_db = 103.8
    relay_user_b = 20.9

    [fading]
    bs_relay = "rician"
    bs_relay_k_db = 6.0
    relay_user = "rayleigh"
    relay_user_k_db = 6.0         # read only when relay_user = "rician"

    [bernoulli]                   # required when channel = "bernoulli"
    p1 = ...
    p2 = ...

    [traffic]
    model = "poisson"             # poisson | deterministic | saturated
    rate_pps = 50.0
    packet_size_bits = 1000.0
    n_bits = ...                  # required for deterministic
    backlog_bits = ...            # saturated top-up level, default one packet

    [scheduler]
    kind = "maxweight"            # maxweight | fixed
    differential = true

    [metrics]
    warmup_slots = 0
    drift_threshold_bits_per_slot = ...   # default 1% of a packet

    [experiment]
    seed = 1
    replications = 1
    seeds = [...]                 # overrides seed/replications
    sweep = [...]                 # arrival rates, packets/s
    output_dir = "results"
    parallel = 1
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from bufrelay.analytic import ChannelProbs
from bufrelay.channel import FadingModel, LinkBudget
from bufrelay.engine import Mode, ScenarioConfig, SchedulerPolicy
from bufrelay.errors import ConfigError, DomainError
from bufrelay.traffic import DeterministicBits, Poisson, Saturated

DEFAULTS: dict[str, dict] = {
    "scenario": {
        "relaying": "both",
        "channel": "fading",
        "horizon_slots": 10_000,
        "slot_duration_s": 1e-3,
        "relay_buffer_cap_bits": "unlimited",
    },
    "geometry": {
        "cell_radius_m": 1000.0,
        "min_ue_bs_distance_m": 50.0,
        "relay_distance_m": 500.0,
        "user_distance_m": 1000.0,
        "user_angle_deg": 0.0,
        "bs_antenna_height_m": 15.0,
        "relay_antenna_height_m": 10.0,
        "user_antenna_height_m": 1.5,
    },
    "radio": {
        "bandwidth_hz": 180e3,
        "noise_psd_dbm_hz": -174.0,
        "bs_tx_power_dbm": -8.0,
        "relay_tx_power_dbm": -25.0,
    },
    "pathloss": {
        "bs_relay_a_db": 100.7,
        "bs_relay_b": 23.5,
        "relay_user_a_db": 103.8,
        "relay_user_b": 20.9,
    },
    "fading": {
        "bs_relay": "rician",
        "bs_relay_k_db": 6.0,
        "relay_user": "rayleigh",
        "relay_user_k_db": 6.0,
    },
    "bernoulli": {"p1": None, "p2": None},
    "traffic": {
        "model": "poisson",
        "rate_pps": 50.0,
        "packet_size_bits": 1000.0,
        "n_bits": None,
        "backlog_bits": None,
    },
    "scheduler": {"kind": "maxweight", "differential": True},
    "metrics": {"warmup_slots": 0, "drift_threshold_bits_per_slot": None},
    "experiment": {
        "seed": 1,
        "replications": 1,
        "seeds": None,
        "sweep": None,
        "output_dir": "results",
        "parallel": 1,
    },
}

RELAYING_CHOICES = ("conventional", "buffered", "both")


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: ScenarioConfig  # mode set to the first relaying mode requested
    relaying: tuple[str, ...]
    seeds: tuple[int, ...]
    output_dir: Path
    sweep: tuple[float, ...] | None = None
    parallel: int = 1
    warmup_slots: int = 0
    drift_threshold_bits_per_slot: float | None = None
    settings: dict = field(default_factory=dict)  # fully resolved file values

    def modes(self) -> list[Mode]:
        channel = "fading" if self.scenario.mode.fading else "bernoulli"
        return [Mode.of(r, channel) for r in self.relaying]


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """Map (section, key) to the 1-based line defining it."""
    out: dict[tuple[str, str], int] = {}
    section = ""
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.\-]+)\s*\]", line)
        if m:
            section = m.group(1)
            out.setdefault((section, ""), n)
            continue
        m = re.match(r"^([A-Za-z0-9_\-]+)\s*=", line)
        if m:
            out.setdefault((section, m.group(1)), n)
    return out


class _Reader:
    def __init__(self, data: dict, lines: dict[tuple[str, str], int]):
        self.data = data
        self.lines = lines

    def line(self, section: str, key: str = "") -> int | None:
        return self.lines.get((section, key))

    def error(self, section: str, key: str, msg: str) -> ConfigError:
        return ConfigError(f"{section}.{key}", msg, self.line(section, key))

    def raw(self, section: str, key: str):
        return self.data.get(section, {}).get(key, DEFAULTS[section][key])

    def number(self, section: str, key: str, *, positive=False, nonneg=False, integer=False):
        v = self.raw(section, key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(section, key, f"expected a number, got {v!r}")
        if not math.isfinite(v):
            raise self.error(section, key, f"must be finite, got {v!r}")
        if integer and int(v) != v:
            raise self.error(section, key, f"expected an integer, got {v!r}")
        if positive and not v > 0:
            raise self.error(section, key, f"must be > 0, got {v!r}")
        if nonneg and not v >= 0:
            raise self.error(section, key, f"must be >= 0, got {v!r}")
        return int(v) if integer else float(v)

    def choice(self, section: str, key: str, choices) -> str:
        v = self.raw(section, key)
        if not isinstance(v, str) or v.lower() not in choices:
            raise self.error(section, key, f"expected one of {list(choices)}, got {v!r}")
        return v.lower()

    def required(self, section: str, key: str, why: str):
        if self.raw(section, key) is None:
            where = self.line(section)
            raise ConfigError(f"{section}.{key}", f"missing required field ({why})", where)


def _check_keys(data: dict, lines) -> None:
    for section, body in data.items():
        if section not in DEFAULTS:
            raise ConfigError(section, "unknown section", lines.get((section, "")))
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a [section] table", lines.get(("", section)))
        for key in body:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{section}.{key}", "unknown key", lines.get((section, key)))


def _fading(r: _Reader, hop: str) -> FadingModel:
    kind = r.choice("fading", hop, ("rayleigh", "rician"))
    if kind == "rician":
        k_db = r.number("fading", f"{hop}_k_db")
        return FadingModel.rician(k_db)
    return FadingModel.rayleigh()


def _geometry(r: _Reader) -> tuple[float, float, dict]:
    g = {k: r.number("geometry", k) for k in DEFAULTS["geometry"]}
    for k in ("cell_radius_m", "relay_distance_m", "user_distance_m", "min_ue_bs_distance_m"):
        if not g[k] > 0:
            raise r.error("geometry", k, f"must be > 0, got {g[k]!r}")
    if g["relay_distance_m"] > g["cell_radius_m"]:
        raise r.error("geometry", "relay_distance_m", "relay lies outside the cell")
    if not g["min_ue_bs_distance_m"] <= g["user_distance_m"] <= g["cell_radius_m"]:
        raise r.error(
            "geometry", "user_distance_m", "user must sit between the minimum distance and the cell edge"
        )
    theta = math.radians(g["user_angle_deg"])
    d_ru = math.sqrt(
        g["relay_distance_m"] ** 2
        + g["user_distance_m"] ** 2
        - 2 * g["relay_distance_m"] * g["user_distance_m"] * math.cos(theta)
    )
    if not d_ru > 1e-9:
        raise r.error("geometry", "user_distance_m", "user coincides with the relay")
    g["relay_user_distance_m"] = d_ru
    return g["relay_distance_m"], d_ru, g


def build_spec(data: dict, text: str = "") -> ExperimentSpec:
    """Validate a parsed TOML document; ``text`` is used for line numbers."""
    lines = _line_index(text)
    _check_keys(data, lines)
    r = _Reader(data, lines)

    relaying = r.choice("scenario", "relaying", RELAYING_CHOICES)
    channel = r.choice("scenario", "channel", ("fading", "bernoulli"))
    horizon = r.number("scenario", "horizon_slots", positive=True, integer=True)
    slot = r.number("scenario", "slot_duration_s", positive=True)
    cap_raw = r.raw("scenario", "relay_buffer_cap_bits")
    if isinstance(cap_raw, str):
        if cap_raw.lower() not in ("unlimited", "inf"):
            raise r.error("scenario", "relay_buffer_cap_bits", f"expected bits or 'unlimited', got {cap_raw!r}")
        cap = math.inf
    else:
        cap = r.number("scenario", "relay_buffer_cap_bits", positive=True)

    d_br, d_ru, geometry = _geometry(r)
    bw = r.number("radio", "bandwidth_hz", positive=True)
    psd = r.number("radio", "noise_psd_dbm_hz")
    p_bs = r.number("radio", "bs_tx_power_dbm")
    p_rs = r.number("radio", "relay_tx_power_dbm")
    hop1 = LinkBudget(p_bs, d_br, r.number("pathloss", "bs_relay_a_db"), r.number("pathloss", "bs_relay_b"), psd, bw)
    hop2 = LinkBudget(
        p_rs, d_ru, r.number("pathloss", "relay_user_a_db"), r.number("pathloss", "relay_user_b"), psd, bw
    )
    fading1 = _fading(r, "bs_relay")
    fading2 = _fading(r, "relay_user")

    probs = None
    if channel == "bernoulli":
        for key in ("p1", "p2"):
            r.required("bernoulli", key, "Bernoulli channel")
        p1, p2 = r.number("bernoulli", "p1"), r.number("bernoulli", "p2")
        try:
            probs = ChannelProbs(p1, p2)
        except DomainError as exc:
            key = "p1" if not 0 <= p1 <= 1 else "p2"
            raise r.error("bernoulli", key, str(exc)) from None

    model = r.choice("traffic", "model", ("poisson", "deterministic", "saturated"))
    size = r.number("traffic", "packet_size_bits")
    if not size >= 1:
        raise r.error("traffic", "packet_size_bits", f"must be >= 1, got {size!r}")
    if model == "poisson":
        traffic = Poisson(r.number("traffic", "rate_pps", nonneg=True), size)
    elif model == "deterministic":
        r.required("traffic", "n_bits", "deterministic traffic")
        traffic = DeterministicBits(r.number("traffic", "n_bits", positive=True, integer=True))
    else:
        backlog = None
        if r.raw("traffic", "backlog_bits") is not None:
            backlog = r.number("traffic", "backlog_bits", positive=True)
        traffic = Saturated(size, backlog)

    kind = r.choice("scheduler", "kind", ("maxweight", "fixed"))
    diff = r.raw("scheduler", "differential")
    if not isinstance(diff, bool):
        raise r.error("scheduler", "differential", f"expected true/false, got {diff!r}")

    warmup = r.number("metrics", "warmup_slots", nonneg=True, integer=True)
    drift = None
    if r.raw("metrics", "drift_threshold_bits_per_slot") is not None:
        drift = r.number("metrics", "drift_threshold_bits_per_slot", positive=True)

    seeds_raw = r.raw("experiment", "seeds")
    if seeds_raw is None:
        base = r.number("experiment", "seed", nonneg=True, integer=True)
        reps = r.number("experiment", "replications", positive=True, integer=True)
        seeds = tuple(base + k for k in range(reps))
    else:
        if not isinstance(seeds_raw, list) or not seeds_raw:
            raise r.error("experiment", "seeds", "expected a non-empty list of integers")
        if any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in seeds_raw):
            raise r.error("experiment", "seeds", "seeds must be non-negative integers")
        if len(set(seeds_raw)) != len(seeds_raw):
            raise r.error("experiment", "seeds", "seeds must be distinct")
        seeds = tuple(seeds_raw)

    sweep = None
    sweep_raw = r.raw("experiment", "sweep")
    if sweep_raw is not None:
        try:
            sweep = validate_sweep(sweep_raw)
        except ValueError as exc:
            raise r.error("experiment", "sweep", str(exc)) from None
        if model != "poisson":
            raise r.error("experiment", "sweep", "a rate sweep needs Poisson traffic")

    out_dir = r.raw("experiment", "output_dir")
    if not isinstance(out_dir, str) or not out_dir:
        raise r.error("experiment", "output_dir", "expected a path string")
    parallel = r.number("experiment", "parallel", positive=True, integer=True)

    first = "buffered" if relaying == "buffered" else "conventional"
    scenario = ScenarioConfig(
        mode=Mode.of(first, channel),
        traffic=traffic,
        horizon_slots=horizon,
        slot_duration_s=slot,
        seed=seeds[0],
        probs=probs,
        hop1=hop1,
        hop2=hop2,
        hop1_fading=fading1,
        hop2_fading=fading2,
        scheduler=SchedulerPolicy(kind, diff),
        relay_buffer_cap_bits=cap,
    )
    try:
        scenario.validate()
    except ConfigError as exc:
        raise ConfigError(f"scenario.{exc.field}", str(exc)) from None

    settings = {s: {k: r.raw(s, k) for k in DEFAULTS[s]} for s in DEFAULTS}
    settings["geometry"] = geometry
    return ExperimentSpec(
        scenario=scenario,
        relaying=("conventional", "buffered") if relaying == "both" else (relaying,),
        seeds=seeds,
        output_dir=Path(out_dir),
        sweep=sweep,
        parallel=parallel,
        warmup_slots=warmup,
        drift_threshold_bits_per_slot=drift,
        settings=settings,
    )


def validate_sweep(values) -> tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ValueError("expected a non-empty list of arrival rates")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
            raise ValueError(f"arrival rates must be positive numbers, got {v!r}")
        out.append(float(v))
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError("arrival rates must be strictly increasing")
    return tuple(out)


def parse_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    text = path.read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(path), f"malformed TOML: {exc}", int(m.group(1)) if m else None) from None
    return build_spec(data, text)
