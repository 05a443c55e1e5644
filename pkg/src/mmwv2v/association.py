"""Transmitter-receiver association: learned utilities, deferred
acceptance, and the two distance-based baselines.

Receivers collect SINR samples on a parallel control channel during each
scheduling window (one random feasible pairing per transmission slot), turn
them into recency-weighted rate estimates, and propose to transmitters
through deferred acceptance using weighted fairness utilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import MatchingConfig, RadioConfig, TrafficConfig
from .geometry import VRX, VTX, Vehicle, distance


@dataclass(frozen=True)
class CsiRecord:
    slot: int
    tx_id: int
    sinr: float              # linear


def explore_matching(rx_ids: list[int], candidates: dict[int, list[int]],
                     rng: np.random.Generator) -> dict[int, int]:
    """One random feasible one-to-one exploration pairing, rx -> tx.

    Receivers are visited in random order and grab a uniformly random
    still-free transmitter from their neighborhood.
    """
    order = list(rx_ids)
    rng.shuffle(order)
    taken: set[int] = set()
    pairing: dict[int, int] = {}
    for rx in order:
        free = [t for t in candidates.get(rx, []) if t not in taken]
        if not free:
            continue
        tx = free[rng.integers(len(free))]
        pairing[rx] = tx
        taken.add(tx)
    return pairing


def estimate_rates(records: list[CsiRecord], t_s: int, recency: float,
                   tau_exploration: float, radio: RadioConfig) -> dict[int, float]:
    """Recency-weighted rate estimate (bits/s) per transmitter id.

    Weights follow recency^(t_s - t') and are normalized per transmitter
    over its own samples, so a single sample carries weight 1.
    """
    prefactor = 1.0 - tau_exploration / radio.transmission_slot
    grouped: dict[int, list[CsiRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.tx_id, []).append(rec)
    estimates: dict[int, float] = {}
    for tx_id, recs in grouped.items():
        weights = np.array([recency ** (t_s - r.slot) for r in recs])
        weights /= weights.sum()
        rates = np.array([prefactor * radio.bandwidth * math.log2(1.0 + r.sinr)
                          for r in recs])
        estimates[tx_id] = float(weights @ rates)
    return estimates


def utility_pair(rate_est_bps: float, delta_v_kmh: float,
                 traffic: TrafficConfig, matching: MatchingConfig) -> tuple[float, float]:
    """Weighted fairness utilities (transmitter side, receiver side).

    Transmitters discount receivers moving at different speeds; receivers
    favor transmitters whose estimated queue residence P_s / r_est is long.
    Both utilities are negative and increase with the estimated rate.
    """
    if rate_est_bps <= 0:
        raise ValueError("rate estimate must be > 0")
    rate_ms = rate_est_bps / 1000.0          # bits per ms
    rho = traffic.influx_rate                # bits per ms
    w_tx = rho * (1.0 + abs(delta_v_kmh) / matching.delta_v_max)
    q_bar = traffic.packet_size / rate_ms    # ms to flush one packet
    w_rx = rho * (2.0 - q_bar / matching.q_theta)
    return -w_tx / rate_ms, -w_rx / rate_ms


def deferred_acceptance(tx_ids: list[int], rx_ids: list[int],
                        u_tx: dict[tuple[int, int], float],
                        u_rx: dict[tuple[int, int], float]) -> dict[int, int]:
    """Receiver-proposing deferred acceptance; returns tx -> rx.

    ``u_tx[(i, j)]`` is transmitter i's utility for receiver j and
    ``u_rx[(i, j)]`` receiver j's utility for transmitter i; only pairs
    present in both tables are feasible. Ties break toward the lower id so
    the outcome is deterministic.
    """
    feasible = set(u_tx) & set(u_rx)
    prefs: dict[int, list[int]] = {}
    for j in rx_ids:
        ranked = sorted((i for i in tx_ids if (i, j) in feasible),
                        key=lambda i: (-u_rx[(i, j)], i))
        if ranked:
            prefs[j] = ranked
    match_tx: dict[int, int] = {}
    match_rx: dict[int, int] = {}
    single = sorted(prefs)                   # unmatched receivers, id order
    cursor = {j: 0 for j in prefs}
    while single:
        j = single.pop(0)
        while cursor[j] < len(prefs[j]):
            i = prefs[j][cursor[j]]
            cursor[j] += 1
            if i not in match_tx:
                match_tx[i] = j
                match_rx[j] = i
                break
            held = match_tx[i]
            better = (u_tx[(i, j)], -j) > (u_tx[(i, held)], -held)
            if better:
                del match_rx[held]
                single.append(held)
                match_tx[i] = j
                match_rx[j] = i
                break
        # j stays single once its whole list has been refused
    return match_tx


def blocking_pairs(match_tx: dict[int, int],
                   u_tx: dict[tuple[int, int], float],
                   u_rx: dict[tuple[int, int], float]) -> list[tuple[int, int]]:
    """Exhaustive scan for pairs that both strictly prefer each other to
    their current partners; empty list means the matching is stable."""
    feasible = set(u_tx) & set(u_rx)
    match_rx = {j: i for i, j in match_tx.items()}
    out = []
    for (i, j) in feasible:
        if match_tx.get(i) == j:
            continue
        cur_j = match_tx.get(i)
        cur_i = match_rx.get(j)
        tx_prefers = cur_j is None or u_tx[(i, j)] > u_tx[(i, cur_j)]
        rx_prefers = cur_i is None or u_rx[(i, j)] > u_rx[(cur_i, j)]
        if tx_prefers and rx_prefers:
            out.append((i, j))
    return out


# -- baselines -----------------------------------------------------------

def mind_pairing(vehicles: list[Vehicle], radius: float) -> dict[int, int]:
    """Minimum-distance pairing: transmitters sorted by longitudinal
    position each grab their nearest free receiver in coverage."""
    txs = sorted((v for v in vehicles if v.role == VTX), key=lambda v: (v.x, v.id))
    rxs = [v for v in vehicles if v.role == VRX]
    taken: set[int] = set()
    match: dict[int, int] = {}
    for tx in txs:
        best = None
        best_key = None
        for rx in rxs:
            if rx.id in taken:
                continue
            d = distance(tx, rx)
            if d <= radius and (best_key is None or (d, rx.id) < best_key):
                best, best_key = rx, (d, rx.id)
        if best is not None:
            match[tx.id] = best.id
            taken.add(best.id)
    return match


class AsynPairing:
    """Entry-triggered long-term pairing.

    A newcomer pairs with a single vehicle of the opposite role located in
    the first ``entry_window`` meters of the segment, same or adjacent
    lane. Pairs persist until one endpoint leaves the segment.
    """

    def __init__(self, entry_window: float = 20.0):
        self.entry_window = entry_window
        self.pairs: dict[int, int] = {}      # tx -> rx
        self._partner: dict[int, int] = {}   # symmetric view

    def matched_ids(self) -> set[int]:
        return set(self._partner)

    def on_entry(self, newcomer: Vehicle, vehicles: list[Vehicle]) -> tuple[int, int] | None:
        if newcomer.x > self.entry_window:
            return None
        best = None
        best_key = None
        for v in vehicles:
            if v.id == newcomer.id or v.role == newcomer.role:
                continue
            if v.id in self._partner or v.x > self.entry_window:
                continue
            if abs(v.lane - newcomer.lane) > 1:
                continue
            d = distance(newcomer, v)
            if best_key is None or (d, v.id) < best_key:
                best, best_key = v, (d, v.id)
        if best is None:
            return None
        tx, rx = (newcomer, best) if newcomer.role == VTX else (best, newcomer)
        self.pairs[tx.id] = rx.id
        self._partner[tx.id] = rx.id
        self._partner[rx.id] = tx.id
        return tx.id, rx.id

    def on_exit(self, vehicle_id: int) -> None:
        partner = self._partner.pop(vehicle_id, None)
        if partner is None:
            return
        self._partner.pop(partner, None)
        self.pairs.pop(vehicle_id, None)
        self.pairs.pop(partner, None)
