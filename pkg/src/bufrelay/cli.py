"""Command-line experiment driver.

    bufrelay run CONFIG [--out DIR] [--seed N] [--parallel K]
                        [--mode conventional|buffered|both] [--sweep 10,20,...]
    bufrelay interrupt --p1 P --p2 P [--cap N]

``run`` writes, per (rate, mode, seed), ``trace_<mode>_<rate>_<seed>.csv``;
per (rate, mode), ``cdf_<mode>_<rate>.csv`` pooled over seeds; and one
``summary.json``.  The output directory is taken from ``--out``, else the
``BUFRELAY_OUT`` environment variable, else the config file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from bufrelay import analytic, engine
from bufrelay.config import RELAYING_CHOICES, ExperimentSpec, parse_config, validate_sweep
from bufrelay.errors import ConfigError, DomainError
from bufrelay.metrics import (
    delay_cdf,
    mean_delay,
    stability_classify,
    summarize,
    write_cdf_csv,
    write_trace_csv,
)
from bufrelay.traffic import Poisson

log = logging.getLogger("bufrelay")

OUT_ENV = "BUFRELAY_OUT"


def rate_label(rate: float | None, traffic) -> str:
    if rate is None:
        return type(traffic).__name__.lower()
    return f"{rate:g}"


def _cell_configs(spec: ExperimentSpec):
    """Yield (rate, mode, seed, config) in a fixed order."""
    base = spec.scenario
    rates = list(spec.sweep) if spec.sweep else [None]
    for rate in rates:
        traffic = base.traffic
        if rate is not None:
            traffic = Poisson(rate, base.traffic.packet_size_bits)
        elif isinstance(traffic, Poisson):
            rate = traffic.rate_pps
        for mode in spec.modes():
            for seed in spec.seeds:
                yield rate, mode, seed, replace(base, mode=mode, traffic=traffic, seed=seed)


def _run_cell(args):
    config, trace_path, warmup, drift = args
    record = engine.run(config)
    write_trace_csv(record, trace_path)
    summary = summarize(record, warmup, drift)
    delays = record.delay_samples(warmup) if record.delays_valid else np.zeros(0, dtype=np.int64)
    return summary, delays, record.q_bs, record.q_relay, record.arrived_packets


def run_experiment(spec: ExperimentSpec, out_dir: str | Path | None = None) -> dict:
    """Run every (rate, mode, seed) cell and write the result files.

    Conventional and buffered cells with the same seed share arrivals and
    channel realizations.  Returns the summary that is written to
    ``summary.json``.
    """
    out = Path(out_dir) if out_dir is not None else spec.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")

    cells = list(_cell_configs(spec))
    jobs = []
    for rate, mode, seed, cfg in cells:
        name = f"trace_{mode.relaying}_{rate_label(rate, cfg.traffic)}_{seed}.csv"
        jobs.append((cfg, out / name, spec.warmup_slots, spec.drift_threshold_bits_per_slot))

    log.debug("running %d cells with %d worker(s) into %s", len(jobs), spec.parallel, out)
    if spec.parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.parallel) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]

    per_cell = []
    groups: dict[tuple, list] = {}
    for (rate, mode, seed, cfg), (summary, delays, q_bs, q_relay, arrived) in zip(cells, results):
        label = rate_label(rate, cfg.traffic)
        per_cell.append({"rate": label, "relaying": mode.relaying, **summary})
        groups.setdefault((label, mode), []).append((cfg, summary, delays, q_bs, q_relay, arrived))

    aggregate = []
    for (label, mode), rows in groups.items():
        cfg = rows[0][0]
        pooled = np.concatenate([r[2] for r in rows])
        seeds = [r[0].seed for r in rows]
        meta = {"seeds": seeds, "relaying": mode.relaying, "rate": label, "config": cfg.to_dict()}
        entry = {"rate": label, "relaying": mode.relaying, "seeds": seeds}
        if pooled.size:
            write_cdf_csv(
                delay_cdf(pooled, cfg.slot_duration_s), out / f"cdf_{mode.relaying}_{label}.csv", meta
            )
            entry["mean_delay_ms"] = mean_delay(pooled, cfg.slot_duration_s)
        else:
            entry["mean_delay_ms"] = None
        duration = cfg.horizon_slots * cfg.slot_duration_s
        entry["throughput_bits_per_slot"] = float(np.mean([r[1]["throughput_bits_per_slot"] for r in rows]))
        if "throughput_pps" in rows[0][1]:
            entry["throughput_pps"] = float(np.mean([r[1]["throughput_pps"] for r in rows]))
            entry["arrival_rate_pps"] = float(np.mean([r[5] for r in rows])) / duration
        if cfg.horizon_slots >= 2000:
            size = cfg.traffic.packet_size_bits
            for node, idx in (("bs", 3), ("relay", 4)):
                v = stability_classify(
                    np.mean([r[idx] for r in rows], axis=0), size, spec.drift_threshold_bits_per_slot
                )
                entry[f"stability_{node}"] = v.label
                entry[f"drift_{node}_bits_per_slot"] = v.slope_bits_per_slot
        aggregate.append(entry)

    summary = {
        "settings": spec.settings,
        "seeds": list(spec.seeds),
        "sweep": list(spec.sweep) if spec.sweep else None,
        "relaying": list(spec.relaying),
        "scenario": spec.scenario.to_dict(),
        "cells": per_cell,
        "aggregate": aggregate,
    }
    text = json.dumps(summary, indent=2, sort_keys=True, allow_nan=False)
    (out / "summary.json").write_text(text + "\n")
    return summary


def _apply_overrides(spec: ExperimentSpec, args) -> ExperimentSpec:
    changes = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be >= 0")
        n = len(spec.seeds)
        seeds = tuple(args.seed + k for k in range(n))
        changes["seeds"] = seeds
        changes["scenario"] = replace(spec.scenario, seed=seeds[0])
    if args.parallel is not None:
        if args.parallel < 1:
            raise ConfigError("--parallel", "must be >= 1")
        changes["parallel"] = args.parallel
    if args.mode is not None:
        changes["relaying"] = ("conventional", "buffered") if args.mode == "both" else (args.mode,)
    if args.sweep is not None:
        try:
            sweep = validate_sweep([float(x) for x in args.sweep.split(",") if x.strip()])
        except ValueError as exc:
            raise ConfigError("--sweep", str(exc)) from None
        if not isinstance(spec.scenario.traffic, Poisson):
            raise ConfigError("--sweep", "a rate sweep needs Poisson traffic")
        changes["sweep"] = sweep
    out = args.out or os.environ.get(OUT_ENV)
    if out:
        changes["output_dir"] = Path(out)
    return replace(spec, **changes) if changes else spec


def _cmd_run(args) -> int:
    spec = _apply_overrides(parse_config(args.config), args)
    summary = run_experiment(spec)
    for row in summary["aggregate"]:
        delay = row["mean_delay_ms"]
        delay_txt = "n/a" if delay is None else f"{delay:.2f} ms"
        print(
            f"rate={row['rate']:>10} {row['relaying']:>12}  mean delay {delay_txt:>12}"
            f"  BS {row.get('stability_bs', '-')}  relay {row.get('stability_relay', '-')}"
        )
    print(f"results written to {spec.output_dir}")
    return 0


def _cmd_interrupt(args) -> int:
    p = analytic.ChannelProbs(args.p1, args.p2)
    q_nb = analytic.interruption_prob_conventional(p)
    sol = analytic.solve_buffered_bernoulli_chain(p, args.cap)
    print(f"conventional interruption q_nb = {q_nb:.6f}")
    print(f"buffered interruption     q_b  = {sol.interruption_prob:.6f}  (relay cap {args.cap} bits)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bufrelay", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("config", help="TOML scenario file (may be empty)")
    p_run.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the file)")
    p_run.add_argument("--seed", type=int, help="base seed; replication k uses seed + k")
    p_run.add_argument("--parallel", type=int, help="worker processes")
    p_run.add_argument("--mode", choices=RELAYING_CHOICES)
    p_run.add_argument("--sweep", help="comma-separated arrival rates in packets/s")
    p_run.set_defaults(func=_cmd_run)

    p_int = sub.add_parser("interrupt", help="interruption probabilities for Bernoulli links")
    p_int.add_argument("--p1", type=float, required=True)
    p_int.add_argument("--p2", type=float, required=True)
    p_int.add_argument("--cap", type=int, default=analytic.DEFAULT_CHAIN_CAP)
    p_int.set_defaults(func=_cmd_interrupt)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
