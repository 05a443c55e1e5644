"""Aggregation of per-slot records into evaluation artifacts: empirical
CDFs, joint delay/drop threshold tables and pairing statistics, plus the
CSV/JSON exports every run directory carries."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MetricsBundle:
    config_hash: str = ""
    seed: int = 0
    method: str = ""
    rate_samples: list[float] = field(default_factory=list)       # bits/s
    delays: list[float] = field(default_factory=list)             # ms
    sched_points: list[tuple[float, float]] = field(default_factory=list)
    pairing_fractions: list[float] = field(default_factory=list)
    total_arrived: int = 0
    total_delivered: int = 0
    total_dropped: int = 0

    def merge(self, other: "MetricsBundle") -> "MetricsBundle":
        out = MetricsBundle(self.config_hash, self.seed, self.method)
        out.rate_samples = self.rate_samples + other.rate_samples
        out.delays = self.delays + other.delays
        out.sched_points = self.sched_points + other.sched_points
        out.pairing_fractions = self.pairing_fractions + other.pairing_fractions
        out.total_arrived = self.total_arrived + other.total_arrived
        out.total_delivered = self.total_delivered + other.total_delivered
        out.total_dropped = self.total_dropped + other.total_dropped
        return out


def cdf(samples, grid) -> list[tuple[float, float]]:
    """Right-continuous empirical CDF evaluated on ``grid``."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("cdf of an empty sample set")
    ordered = np.sort(samples)
    grid = np.asarray(grid, dtype=float)
    fractions = np.searchsorted(ordered, grid, side="right") / ordered.size
    return list(zip(grid.tolist(), fractions.tolist()))


def quantile_grid(samples, points: int = 200) -> np.ndarray:
    """Evaluation grid spanning the sample range, endpoint inclusive."""
    samples = np.asarray(samples, dtype=float)
    return np.linspace(samples.min(), samples.max(), points)


def joint_bound_table(points, delay_bounds, drop_bounds) -> list[list[float]]:
    """Percentage of (delay, drop) points jointly below each bound pair.

    Rows follow ``delay_bounds``, columns ``drop_bounds``; percentages are
    rounded to two decimals to mirror the tabular export format.
    """
    pts = list(points)
    table = []
    for d in delay_bounds:
        row = []
        for g in drop_bounds:
            if not pts:
                row.append(0.0)
                continue
            hits = sum(1 for delay, drop in pts if delay <= d and drop <= g)
            row.append(round(100.0 * hits / len(pts), 2))
        table.append(row)
    return table


def pairing_ratio(fractions) -> float:
    """Time-averaged fraction of matched transmitters."""
    fractions = list(fractions)
    if not fractions:
        return 0.0
    return sum(fractions) / len(fractions)


def summarize(bundle: MetricsBundle) -> dict:
    rates = np.asarray(bundle.rate_samples, dtype=float)
    delays = np.asarray(bundle.delays, dtype=float)

    def stats(arr):
        if arr.size == 0:
            return None
        return {
            "count": int(arr.size),
            "mean": float(arr.mean()),
            "p10": float(np.percentile(arr, 10)),
            "p50": float(np.percentile(arr, 50)),
            "p90": float(np.percentile(arr, 90)),
        }

    return {
        "config_hash": bundle.config_hash,
        "seed": bundle.seed,
        "method": bundle.method,
        "rate_bps": stats(rates),
        "delay_ms": stats(delays),
        "pairing_ratio": pairing_ratio(bundle.pairing_fractions),
        "packets": {
            "arrived": bundle.total_arrived,
            "delivered": bundle.total_delivered,
            "dropped": bundle.total_dropped,
        },
        "success_ratio": (bundle.total_delivered / bundle.total_arrived
                          if bundle.total_arrived else None),
        "scheduling_points": len(bundle.sched_points),
    }


def write_outputs(bundle: MetricsBundle, out_dir: str,
                  delay_bounds=(0.5, 0.2, 0.1, 0.05),
                  drop_bounds=(0.1, 0.01, 0.001)) -> None:
    """Write the standard export set into ``out_dir``.

    Files: cdf_rate.csv, cdf_delay.csv, scatter_delay_drop.csv,
    table_joint_bounds.json, summary.json. Every file carries the config
    hash and seed so figures stay re-derivable.
    """
    os.makedirs(out_dir, exist_ok=True)
    header_meta = [bundle.config_hash, str(bundle.seed)]

    def write_cdf(name, samples, column):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["config_hash", "seed", column, "cdf"])
            if samples:
                for value, frac in cdf(samples, quantile_grid(samples)):
                    writer.writerow(header_meta + [repr(value), repr(frac)])

    write_cdf("cdf_rate.csv", bundle.rate_samples, "rate_bps")
    write_cdf("cdf_delay.csv", bundle.delays, "delay_ms")

    with open(os.path.join(out_dir, "scatter_delay_drop.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config_hash", "seed", "mean_delay_ms", "drop_ratio"])
        for delay, drop in bundle.sched_points:
            writer.writerow(header_meta + [repr(delay), repr(drop)])

    table = {
        "config_hash": bundle.config_hash,
        "seed": bundle.seed,
        "delay_bounds_ms": list(delay_bounds),
        "drop_bounds": list(drop_bounds),
        "percent": joint_bound_table(bundle.sched_points, delay_bounds, drop_bounds),
    }
    with open(os.path.join(out_dir, "table_joint_bounds.json"), "w") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)

    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summarize(bundle), fh, indent=2, sort_keys=True)
