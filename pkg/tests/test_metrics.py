"""Metric aggregation: empirical CDFs, joint threshold tables, pairing
statistics and the file exports."""

import csv
import json
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmwv2v import metrics
from mmwv2v.metrics import (MetricsBundle, cdf, joint_bound_table,
                            pairing_ratio, quantile_grid, summarize,
                            write_outputs)


# -- cdf ------------------------------------------------------------------

def test_cdf_hand_counts():
    pts = cdf([1.0, 2.0, 2.0, 4.0], [0.5, 1.0, 2.0, 3.0, 4.0, 5.0])
    assert pts == [(0.5, 0.0), (1.0, 0.25), (2.0, 0.75), (3.0, 0.75),
                   (4.0, 1.0), (5.0, 1.0)]


def test_cdf_empty_raises():
    with pytest.raises(ValueError):
        cdf([], [0.0])


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1,
                max_size=200))
def test_cdf_monotone_and_bounded(samples):
    grid = np.linspace(min(samples) - 1.0, max(samples) + 1.0, 50)
    values = [f for _, f in cdf(samples, grid)]
    assert all(0.0 <= f <= 1.0 for f in values)
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] == 1.0


def test_cdf_dkw_agreement_with_normal(rng):
    """Empirical CDF of a large normal sample stays within the 1e-3
    confidence DKW band of the true CDF."""
    from math import erf, log, sqrt
    n = 20000
    samples = rng.normal(size=n)
    grid = np.linspace(-3.0, 3.0, 61)
    eps = sqrt(log(2.0 / 1e-3) / (2.0 * n))
    for x, f in cdf(samples, grid):
        truth = 0.5 * (1.0 + erf(x / sqrt(2.0)))
        assert abs(f - truth) <= eps


def test_quantile_grid_spans_range():
    grid = quantile_grid([2.0, 10.0], points=5)
    assert grid[0] == 2.0 and grid[-1] == 10.0
    assert len(grid) == 5


# -- joint bound table ----------------------------------------------------

def test_joint_bound_table_fixture():
    points = [(0.4, 0.05), (0.1, 0.005), (0.6, 0.0005), (0.05, 0.2)]
    delay_bounds = (0.5, 0.2, 0.1)
    drop_bounds = (0.1, 0.01, 0.001)
    table = joint_bound_table(points, delay_bounds, drop_bounds)
    # hand counts: rows are delay bounds, columns drop bounds
    assert table == [[50.0, 25.0, 0.0],
                     [25.0, 25.0, 0.0],
                     [25.0, 25.0, 0.0]]


def test_joint_bound_table_monotone_under_loosening(rng):
    points = [(float(rng.uniform(0, 1)), float(rng.uniform(0, 0.3)))
              for _ in range(200)]
    delay_bounds = (0.05, 0.1, 0.2, 0.5, 1.0)       # loosening downward
    drop_bounds = (0.001, 0.01, 0.1, 0.5)
    table = joint_bound_table(points, delay_bounds, drop_bounds)
    for row in table:
        assert row == sorted(row)
    for col in zip(*table):
        assert list(col) == sorted(col)


def test_joint_bound_table_empty_points():
    assert joint_bound_table([], (0.1,), (0.1,)) == [[0.0]]


# -- bundle ---------------------------------------------------------------

def bundle_with(rates=(), delays=(), sched=(), fractions=(), totals=(0, 0, 0)):
    b = MetricsBundle(config_hash="h", seed=1, method="waf")
    b.rate_samples = list(rates)
    b.delays = list(delays)
    b.sched_points = list(sched)
    b.pairing_fractions = list(fractions)
    b.total_arrived, b.total_delivered, b.total_dropped = totals
    return b


def test_merge_concatenates_and_sums():
    a = bundle_with(rates=[1.0], delays=[0.5], sched=[(0.1, 0.0)],
                    fractions=[0.5], totals=(10, 6, 2))
    b = bundle_with(rates=[2.0], delays=[], sched=[], fractions=[1.0],
                    totals=(5, 5, 0))
    m = a.merge(b)
    assert m.rate_samples == [1.0, 2.0]
    assert m.total_arrived == 15 and m.total_delivered == 11
    assert m.pairing_fractions == [0.5, 1.0]


def test_merge_associative():
    a = bundle_with(rates=[1.0], totals=(1, 1, 0))
    b = bundle_with(rates=[2.0], totals=(2, 0, 2))
    c = bundle_with(rates=[3.0], totals=(3, 2, 1))
    left = a.merge(b).merge(c)
    right = a.merge(b.merge(c))
    assert left.rate_samples == right.rate_samples
    assert left.total_arrived == right.total_arrived


def test_pairing_ratio():
    assert pairing_ratio([]) == 0.0
    assert pairing_ratio([0.5, 1.0]) == pytest.approx(0.75)


def test_summarize_fields():
    b = bundle_with(rates=[1.0, 3.0], delays=[0.2], fractions=[0.8],
                    totals=(10, 7, 3))
    s = summarize(b)
    assert s["rate_bps"]["mean"] == pytest.approx(2.0)
    assert s["delay_ms"]["count"] == 1
    assert s["success_ratio"] == pytest.approx(0.7)
    assert s["pairing_ratio"] == pytest.approx(0.8)


def test_summarize_empty_run():
    s = summarize(bundle_with())
    assert s["rate_bps"] is None
    assert s["delay_ms"] is None
    assert s["success_ratio"] is None


# -- exports --------------------------------------------------------------

def test_write_outputs_files_and_roundtrip(tmp_path):
    b = bundle_with(rates=[1e9, 2e9, 3e9], delays=[0.1, 0.4],
                    sched=[(0.1, 0.0), (0.3, 0.5)], fractions=[1.0],
                    totals=(20, 15, 5))
    out = str(tmp_path / "run")
    write_outputs(b, out)
    names = {"cdf_rate.csv", "cdf_delay.csv", "scatter_delay_drop.csv",
             "table_joint_bounds.json", "summary.json"}
    assert names <= set(os.listdir(out))

    with open(os.path.join(out, "summary.json")) as fh:
        s = json.load(fh)
    assert s == summarize(b)

    with open(os.path.join(out, "cdf_rate.csv")) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["config_hash", "seed", "rate_bps", "cdf"]
    assert all(row[0] == "h" for row in rows[1:])
    values = [float(r[3]) for r in rows[1:]]
    assert values == sorted(values)

    with open(os.path.join(out, "table_joint_bounds.json")) as fh:
        table = json.load(fh)
    assert table["percent"] == joint_bound_table(
        b.sched_points, table["delay_bounds_ms"], table["drop_bounds"])


def test_write_outputs_empty_bundle(tmp_path):
    out = str(tmp_path / "empty")
    write_outputs(bundle_with(), out)
    with open(os.path.join(out, "cdf_rate.csv")) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1                      # header only
