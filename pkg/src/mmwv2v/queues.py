"""Per-transmitter packet queues with deadline-based dropping.

Bits drain continuously within a slot, so the head packet may be served
partially and delivery instants are sub-slot accurate. A packet is dropped
the moment it provably cannot meet its deadline: by age, or by projecting
its completion under the current rate at arrival events and scheduling
boundaries.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


@dataclass
class Packet:
    arrival: float           # ms
    bits_remaining: float


@dataclass
class PacketQueue:
    packet_size: float       # bits
    max_queue: int           # packets
    deadline: float          # ms
    packets: deque = field(default_factory=deque)
    arrived: int = 0
    delivered: int = 0
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.packets)

    def conservation_ok(self) -> bool:
        return self.arrived == self.delivered + self.dropped + len(self.packets)

    def add_arrivals(self, count: int, t_arr: float) -> int:
        """Append ``count`` packets timestamped ``t_arr``; overflow beyond
        the buffer limit is dropped immediately. Returns drops."""
        self.arrived += count
        space = self.max_queue - len(self.packets)
        accepted = min(count, max(space, 0))
        for _ in range(accepted):
            self.packets.append(Packet(t_arr, self.packet_size))
        overflow = count - accepted
        self.dropped += overflow
        return overflow

    def serve(self, rate_bps: float, slot_start: float, t_t: float) -> list[float]:
        """Drain up to rate*T_t bits from the head of the queue.

        Head packets whose completion would land past their deadline are
        dropped without consuming capacity. Returns the delays of packets
        delivered this slot.
        """
        if rate_bps < 0:
            raise ValueError("rate must be >= 0")
        if rate_bps == 0 or not self.packets:
            return []
        rate_ms = rate_bps / 1000.0          # bits per ms
        budget = rate_ms * t_t
        elapsed = 0.0                        # ms spent transmitting this slot
        delays: list[float] = []
        while budget > 1e-9 and self.packets:
            head = self.packets[0]
            finish = slot_start + elapsed + head.bits_remaining / rate_ms
            if finish - head.arrival > self.deadline:
                self.packets.popleft()
                self.dropped += 1
                continue
            if head.bits_remaining <= budget:
                budget -= head.bits_remaining
                elapsed += head.bits_remaining / rate_ms
                self.packets.popleft()
                self.delivered += 1
                delays.append(slot_start + elapsed - head.arrival)
            else:
                head.bits_remaining -= budget
                budget = 0.0
        return delays

    def enforce_deadlines(self, now: float, rate_bps: float | None) -> int:
        """Drop packets that cannot meet the deadline at an event.

        Age-based drops apply always; the projection under the current rate
        applies only when the link is active (``rate_bps`` given and > 0).
        Returns the number of drops.
        """
        drops = 0
        if rate_bps is not None and rate_bps > 0:
            rate_ms = rate_bps / 1000.0
            kept = deque()
            backlog = 0.0
            for pkt in self.packets:
                backlog += pkt.bits_remaining
                if now + backlog / rate_ms - pkt.arrival > self.deadline:
                    backlog -= pkt.bits_remaining
                    drops += 1
                else:
                    kept.append(pkt)
            self.packets = kept
        else:
            kept = deque(p for p in self.packets if now - p.arrival < self.deadline)
            drops = len(self.packets) - len(kept)
            self.packets = kept
        self.dropped += drops
        return drops


def mean_delay(delays: list[float]) -> float | None:
    """Per-slot average delay; None when nothing was delivered."""
    if not delays:
        return None
    return sum(delays) / len(delays)


def scheduling_stats(slot_means: list[float | None], arrivals: int,
                     delivered: int) -> tuple[float | None, float]:
    """Aggregate one scheduling window into (mean delay, drop ratio).

    Slots without deliveries are excluded from the delay average; the drop
    ratio of an empty window is 0 by convention.
    """
    defined = [m for m in slot_means if m is not None]
    d_sch = sum(defined) / len(defined) if defined else None
    if arrivals <= 0:
        return d_sch, 0.0
    gamma = 1.0 - delivered / arrivals
    return d_sch, min(max(gamma, 0.0), 1.0)
