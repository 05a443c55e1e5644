"""Command line front end: single runs, parameter sweeps and config
validation.

Exit codes: 0 success, 1 configuration error, 2 runtime failure. The
default output root comes from ``MMWV2V_OUT`` (falling back to ./runs).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import engine, metrics
from .config import (DEG, ConfigError, SimConfig, _as_toml_dict,
                     apply_overrides, config_from_dict, load_config)


def _load(args) -> SimConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = config_from_dict({})
    if args.set:
        cfg = apply_overrides(cfg, args.set)
    return cfg


def _out_root(args) -> str:
    if args.output:
        return args.output
    return os.environ.get("MMWV2V_OUT", "runs")


def _write_run(cfg: SimConfig, out_dir: str) -> dict:
    bundle = engine.run(cfg)
    metrics.write_outputs(bundle, out_dir)
    with open(os.path.join(out_dir, "config_resolved.json"), "w") as fh:
        json.dump(_as_toml_dict(cfg), fh, indent=2, sort_keys=True, default=str)
    return metrics.summarize(bundle)


def _print_summary_row(label: str, summary: dict) -> None:
    rate = summary["rate_bps"]
    delay = summary["delay_ms"]
    print(f"{label:40s} pairing={summary['pairing_ratio']:.3f} "
          f"success={summary['success_ratio'] if summary['success_ratio'] is not None else float('nan'):.3f} "
          f"rate_p50={rate['p50']:.3e}" if rate else f"{label:40s} (no traffic)",
          f"delay_p50={delay['p50']:.4f}" if delay else "")


def cmd_run(args) -> int:
    cfg = _load(args)
    out_dir = os.path.join(_out_root(args),
                           f"{cfg.method}_seed{cfg.seed}_{cfg.hash()}")
    summary = _write_run(cfg, out_dir)
    _print_summary_row(os.path.basename(out_dir), summary)
    print(f"outputs written to {out_dir}")
    return 0


def _csv_list(text: str, cast):
    return [cast(x) for x in text.split(",") if x]


def cmd_sweep(args) -> int:
    base = _load(args)
    densities = _csv_list(args.densities, float) if args.densities else [base.highway.density]
    lambdas = _csv_list(args.lambdas, float) if args.lambdas else [base.traffic.arrival_rate]
    sizes = _csv_list(args.packet_sizes, float) if args.packet_sizes else [base.traffic.packet_size]
    ts_values = _csv_list(args.scheduling_slots, float) if args.scheduling_slots else [base.scheduling_slot]
    methods = _csv_list(args.methods, str) if args.methods else [base.method]
    seeds = _csv_list(args.seeds, int) if args.seeds else [base.seed]
    root = _out_root(args)
    for density in densities:
        for lam in lambdas:
            for size in sizes:
                for ts in ts_values:
                    for method in methods:
                        for seed in seeds:
                            cfg = apply_overrides(base, [
                                f"highway.density={density}",
                                f"traffic.arrival_rate={lam}",
                                f"traffic.packet_size={size}",
                                f"sim.scheduling_slot={ts}",
                                f"sim.method={method}",
                                f"sim.seed={seed}",
                            ])
                            label = (f"d{density:g}_l{lam:g}_p{size:g}_"
                                     f"ts{ts:g}_{method}_s{seed}")
                            summary = _write_run(cfg, os.path.join(root, label))
                            _print_summary_row(label, summary)
    return 0


def cmd_validate(args) -> int:
    checks: list[tuple[str, bool, str]] = []
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"FAIL config: {exc}")
        return 1
    tt = cfg.radio.transmission_slot
    n = cfg.scheduling_slot / tt

    def check(name, ok, detail=""):
        checks.append((name, ok, detail))

    check("slot-divisibility", abs(n - round(n)) < 1e-9,
          f"N = {cfg.scheduling_slot:g}/{tt:g} = {n:g}")
    psi = cfg.antenna.sector_beamwidth
    required = (cfg.antenna.pilot_duration / tt) * psi * psi
    tau = psi * psi / cfg.fixed_beamwidth ** 2 * cfg.antenna.pilot_duration
    check("alignment-feasibility",
          cfg.fixed_beamwidth ** 2 >= required - 1e-12
          and cfg.antenna.pilot_duration <= tt + 1e-12,
          f"fixed-beam tau = {tau:.4f} ms <= T_t = {tt:g} ms")
    check("probability-ranges",
          0 <= cfg.highway.vtx_probability <= 1 and 0 <= cfg.highway.car_truck_ratio <= 1)
    check("sidelobe-range", 0 <= cfg.antenna.sidelobe_gain < 1)
    check("traffic-positivity",
          cfg.traffic.packet_size > 0 and cfg.traffic.arrival_rate > 0)
    failed = False
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        failed |= not ok
        print(f"{status} {name}" + (f": {detail}" if detail else ""))
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmwv2v",
        description="Time-slotted mmWave V2V association/beamwidth simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--set", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="config override")
        p.add_argument("--output", help="output directory root")

    p_run = sub.add_parser("run", help="execute one simulation")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a cartesian parameter grid")
    common(p_sweep)
    p_sweep.add_argument("--densities")
    p_sweep.add_argument("--lambdas")
    p_sweep.add_argument("--packet-sizes")
    p_sweep.add_argument("--scheduling-slots")
    p_sweep.add_argument("--methods")
    p_sweep.add_argument("--seeds")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="statically check a config")
    common(p_val)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except engine.SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
