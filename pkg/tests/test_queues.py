"""Deadline-dropping packet queues: recursion oracle, conservation,
deadline soundness and the scheduling-window aggregates."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmwv2v.queues import PacketQueue, mean_delay, scheduling_stats


def make_queue(packet_size=3200.0, max_queue=1000, deadline=1e12):
    return PacketQueue(packet_size=packet_size, max_queue=max_queue,
                       deadline=deadline)


# -- backlog recursion oracle --------------------------------------------

def test_backlog_recursion_oracle(rng):
    """Without deadline pressure the queue follows the clamped recursion
    backlog' = min(max(backlog - r*T_t, 0) + accepted arrivals, buffer).

    The oracle tracks bits and packet counts independently of the deque
    machinery, over 1000 random (rate, arrivals) steps.
    """
    t_t = 2.0
    p_s = 3200.0
    q = make_queue(packet_size=p_s, max_queue=40)
    bits = 0.0               # oracle backlog in bits
    count = 0                # oracle backlog in packets (partial head = 1)
    for step in range(1000):
        rate = float(rng.choice([0.0, rng.uniform(1e4, 5e6)]))
        arrivals = int(rng.integers(0, 6))
        slot_start = step * t_t

        q.serve(rate, slot_start, t_t)
        bits = max(bits - rate / 1000.0 * t_t, 0.0)
        # packets remaining = ceil(bits / p_s), the partial head counts as 1
        count = int(math.ceil(bits / p_s - 1e-9)) if bits > 1e-6 else 0

        accepted = min(arrivals, q.max_queue - count)
        bits += accepted * p_s
        count += accepted
        q.add_arrivals(arrivals, slot_start + t_t)

        got_bits = sum(p.bits_remaining for p in q.packets)
        assert got_bits == pytest.approx(bits, rel=1e-9, abs=1e-6)
        assert len(q) == count
        assert q.conservation_ok()


# -- serve mechanics ------------------------------------------------------

def test_serve_partial_packet_and_subslot_delays():
    q = make_queue(packet_size=1000.0, deadline=1e9)
    q.add_arrivals(2, t_arr=0.0)
    # 600 bits/ms * 2 ms = 1200 bits: one delivery at 1000/600 ms in,
    # second packet keeps 800 bits
    delays = q.serve(600e3, slot_start=0.0, t_t=2.0)
    assert delays == [pytest.approx(1000.0 / 600.0)]
    assert q.delivered == 1
    assert len(q) == 1
    assert q.packets[0].bits_remaining == pytest.approx(800.0)
    delays = q.serve(600e3, slot_start=2.0, t_t=2.0)
    assert delays == [pytest.approx(2.0 + 800.0 / 600.0)]
    assert len(q) == 0


def test_serve_zero_rate_noop():
    q = make_queue()
    q.add_arrivals(3, 0.0)
    assert q.serve(0.0, 0.0, 2.0) == []
    assert len(q) == 3
    with pytest.raises(ValueError):
        q.serve(-1.0, 0.0, 2.0)


def test_serve_drops_head_that_cannot_meet_deadline():
    q = make_queue(packet_size=1000.0, deadline=2.0)
    q.add_arrivals(1, t_arr=0.0)
    # At 100 bits/ms the packet would finish at t=10 > deadline 2: dropped
    # without consuming the slot budget.
    assert q.serve(100e3, slot_start=0.0, t_t=2.0) == []
    assert q.dropped == 1
    assert len(q) == 0
    assert q.conservation_ok()


def test_delivered_delay_never_exceeds_deadline(rng):
    deadline = 6.0
    q = make_queue(packet_size=3200.0, max_queue=50, deadline=deadline)
    t_t = 2.0
    for step in range(500):
        slot_start = step * t_t
        rate = float(rng.choice([0.0, rng.uniform(1e5, 1e7)]))
        delays = q.serve(rate, slot_start, t_t)
        for d in delays:
            assert d <= deadline + 1e-9
        q.enforce_deadlines(slot_start + t_t, rate if rate > 0 else None)
        q.add_arrivals(int(rng.integers(0, 4)), slot_start + t_t)
        assert q.conservation_ok()


# -- overflow and deadline events ----------------------------------------

def test_overflow_drops():
    q = make_queue(max_queue=3)
    assert q.add_arrivals(5, 0.0) == 2
    assert len(q) == 3
    assert q.dropped == 2
    assert q.conservation_ok()


def test_enforce_deadlines_by_age():
    q = make_queue(deadline=4.0)
    q.add_arrivals(1, t_arr=0.0)
    q.add_arrivals(1, t_arr=3.0)
    drops = q.enforce_deadlines(now=4.5, rate_bps=None)
    assert drops == 1
    assert len(q) == 1
    assert q.packets[0].arrival == 3.0


def test_enforce_deadlines_by_projection():
    q = make_queue(packet_size=1000.0, deadline=3.0)
    q.add_arrivals(3, t_arr=0.0)
    # 1000 bits/ms: completions at 1, 2, 3 ms after `now`; with now=1 the
    # third would finish at 4 > 3, so exactly one projected drop.
    drops = q.enforce_deadlines(now=1.0, rate_bps=1000e3)
    assert drops == 1
    assert len(q) == 2


@given(st.lists(st.integers(0, 5), min_size=1, max_size=60),
       st.integers(1, 10))
@settings(deadline=None)
def test_conservation_invariant(arrival_pattern, max_queue):
    q = make_queue(packet_size=100.0, max_queue=max_queue, deadline=5.0)
    rng = np.random.default_rng(0)
    for step, k in enumerate(arrival_pattern):
        slot_start = step * 2.0
        q.serve(float(rng.uniform(0, 2e5)), slot_start, 2.0)
        q.enforce_deadlines(slot_start + 2.0, None)
        q.add_arrivals(k, slot_start + 2.0)
        assert q.conservation_ok()


# -- aggregates -----------------------------------------------------------

def test_mean_delay():
    assert mean_delay([]) is None
    assert mean_delay([1.0, 3.0]) == pytest.approx(2.0)


def test_scheduling_stats_two_slot_fixture():
    """Hand-computed window: two slots with deliveries [1.0, 3.0] and
    [2.0], 8 arrivals, 6 delivered -> mean of slot means 2.0, drop 0.25."""
    slot_means = [mean_delay([1.0, 3.0]), mean_delay([2.0]), None]
    d_sch, gamma = scheduling_stats(slot_means, arrivals=8, delivered=6)
    assert d_sch == pytest.approx(2.0)
    assert gamma == pytest.approx(0.25)


def test_scheduling_stats_empty_window():
    d_sch, gamma = scheduling_stats([None, None], arrivals=0, delivered=0)
    assert d_sch is None
    assert gamma == 0.0


def test_scheduling_stats_clamped():
    _, gamma = scheduling_stats([], arrivals=2, delivered=5)
    assert gamma == 0.0
