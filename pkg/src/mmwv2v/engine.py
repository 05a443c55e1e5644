"""Two-timescale simulation loop.

Every scheduling slot: consume the exploration window, pair transmitters
and receivers with the configured method, pick beamwidths, align beams and
charge the alignment penalty to the first transmission slot. Every
transmission slot, in this fixed order: mobility, beam drift, per-link
rates, queue service, deadline enforcement, arrivals, exploration logging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import association, metrics, pso as pso_mod, radio
from .config import SimConfig
from .geometry import (VTX, VRX, Highway, Vehicle, bearing, blocker_matrix,
                       distance, wrap_angle)
from .queues import PacketQueue, mean_delay, scheduling_stats
from .radio import LinkState


class SimulationError(RuntimeError):
    def __init__(self, slot: int, cause: Exception):
        super().__init__(f"simulation failed at slot {slot}: {cause}")
        self.slot = slot


@dataclass
class _Window:
    """Per-transmitter accumulators for one scheduling window."""
    arrivals: int = 0
    delivered: int = 0
    slot_means: list = field(default_factory=list)


@dataclass
class _WorldGeometry:
    """Pathloss and bearing matrices over every (vTx, vRx) pair, computed
    once per transmission slot and sliced per link set."""
    tx_index: dict[int, int]
    rx_index: dict[int, int]
    dist: np.ndarray         # (I, J)
    bear_tx: np.ndarray      # tx -> rx bearing
    bear_rx: np.ndarray      # rx -> tx bearing, same grid
    pathloss: np.ndarray     # dB


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


class Simulation:
    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        self.rng_mobility = _stream(cfg.seed, 0)
        self.rng_explore = _stream(cfg.seed, 2)
        self.rng_pso = _stream(cfg.seed, 3)
        self._arrival_rngs: dict[int, np.random.Generator] = {}
        self.highway = Highway(cfg.highway, self.rng_mobility)
        self.queues: dict[int, PacketQueue] = {}
        for v in self.highway.by_role(VTX):
            self._ensure_queue(v.id)
        self.links: list[LinkState] = []
        self.asyn = association.AsynPairing() if cfg.method == "asyn" else None
        self.records: dict[int, list[association.CsiRecord]] = {}
        self.windows: dict[int, _Window] = {}
        self.bundle = metrics.MetricsBundle(
            config_hash=cfg.hash(), seed=cfg.seed, method=cfg.method)
        self._bootstrapped = False
        self._blk_delta = np.array([d for d, _ in cfg.blockage.table])
        self._blk_beta = np.array([b for _, b in cfg.blockage.table])

    # -- helpers ---------------------------------------------------------

    def _ensure_queue(self, vtx_id: int) -> None:
        tr = self.cfg.traffic
        self.queues[vtx_id] = PacketQueue(
            packet_size=tr.packet_size, max_queue=tr.max_queue,
            deadline=tr.deadline_ms)

    def _arrival_rng(self, vtx_id: int) -> np.random.Generator:
        if vtx_id not in self._arrival_rngs:
            self._arrival_rngs[vtx_id] = _stream(self.cfg.seed, 1, vtx_id)
        return self._arrival_rngs[vtx_id]

    def _vehicle_map(self) -> dict[int, Vehicle]:
        return {v.id: v for v in self.highway.vehicles}

    def _retire_queue(self, vtx_id: int) -> None:
        q = self.queues.pop(vtx_id, None)
        if q is None:
            return
        self.bundle.total_arrived += q.arrived
        self.bundle.total_delivered += q.delivered
        self.bundle.total_dropped += q.dropped
        self._arrival_rngs.pop(vtx_id, None)
        self.windows.pop(vtx_id, None)

    # -- scheduling-slot machinery --------------------------------------

    def _neighbor_map(self) -> dict[int, list[int]]:
        """rx id -> feasible tx ids within the coverage radius."""
        radius = self.cfg.highway.coverage_radius
        txs = self.highway.by_role(VTX)
        rxs = self.highway.by_role(VRX)
        if not txs or not rxs:
            return {rx.id: [] for rx in rxs}
        tx_pos = np.array([[t.x, t.y] for t in txs])
        rx_pos = np.array([[r.x, r.y] for r in rxs])
        diff = rx_pos[:, None, :] - tx_pos[None, :, :]
        near = np.hypot(diff[..., 0], diff[..., 1]) <= radius
        tx_ids = np.array([t.id for t in txs])
        return {rx.id: tx_ids[near[k]].tolist() for k, rx in enumerate(rxs)}

    def bootstrap_first_window(self) -> dict[int, int]:
        """Slot-0 policy before any CSI exists: distance pairing with
        sector-level beams, so exploration can seed the next window."""
        return association.mind_pairing(
            self.highway.vehicles, self.cfg.highway.coverage_radius)

    def _learned_matching(self, t_slot: int) -> dict[int, int]:
        cfg = self.cfg
        neighbor_map = self._neighbor_map()
        vehicles = self._vehicle_map()
        tau_exp = radio.alignment_delay(
            cfg.matching.exploration_beamwidth, cfg.matching.exploration_beamwidth,
            cfg.antenna, cfg.radio.transmission_slot)
        u_tx: dict[tuple[int, int], float] = {}
        u_rx: dict[tuple[int, int], float] = {}
        for rx_id, recs in self.records.items():
            if rx_id not in vehicles:
                continue
            feasible = set(neighbor_map.get(rx_id, []))
            usable = [r for r in recs if r.tx_id in feasible]
            estimates = association.estimate_rates(
                usable, t_slot, cfg.matching.recency, tau_exp, cfg.radio)
            for tx_id, rate_est in estimates.items():
                if rate_est <= 0:
                    continue
                dv = vehicles[tx_id].speed - vehicles[rx_id].speed
                ut, ur = association.utility_pair(
                    rate_est, dv, cfg.traffic, cfg.matching)
                u_tx[(tx_id, rx_id)] = ut
                u_rx[(tx_id, rx_id)] = ur
        tx_ids = sorted(v.id for v in self.highway.by_role(VTX))
        rx_ids = sorted(v.id for v in self.highway.by_role(VRX))
        matching = association.deferred_acceptance(tx_ids, rx_ids, u_tx, u_rx)
        # Vehicles without usable samples this window never enter the game;
        # leftover singles fall back to nearest-neighbor pairing rather than
        # idling for a whole scheduling slot.
        taken_rx = set(matching.values())
        leftover = [v for v in self.highway.vehicles
                    if (v.role == VTX and v.id not in matching)
                    or (v.role == VRX and v.id not in taken_rx)]
        matching.update(association.mind_pairing(
            leftover, cfg.highway.coverage_radius))
        return matching

    def _pair_matrices(self, txs: list[Vehicle], rxs: list[Vehicle]):
        tx_x = np.array([v.x for v in txs])
        tx_y = np.array([v.y for v in txs])
        rx_x = np.array([v.x for v in rxs])
        rx_y = np.array([v.y for v in rxs])
        dx = rx_x[None, :] - tx_x[:, None]
        dy = rx_y[None, :] - tx_y[:, None]
        dist = np.hypot(dx, dy)
        bear_tx = np.arctan2(dy, dx)                 # tx z -> rx j
        bear_rx = np.arctan2(-dy, -dx)               # rx j -> tx z, same grid
        blockers = np.minimum(
            blocker_matrix(txs, rxs, self.highway.vehicles),
            len(self.cfg.blockage.table) - 1)
        delta = self._blk_delta[blockers]
        beta = self._blk_beta[blockers]
        pl = 10.0 * delta * np.log10(np.maximum(dist, 1e-6)) + beta + 15.0 * dist / 1000.0
        return dist, bear_tx, bear_rx, pl

    def _link_geometry(self, links: list[LinkState]):
        """Pathloss and steering-offset matrices over the active links."""
        vehicles = self._vehicle_map()
        txs = [vehicles[l.tx_id] for l in links]
        rxs = [vehicles[l.rx_id] for l in links]
        _, bear_tx, bear_rx, pl = self._pair_matrices(txs, rxs)
        return pl, bear_tx, bear_rx

    def _world_geometry(self) -> _WorldGeometry | None:
        txs = self.highway.by_role(VTX)
        rxs = self.highway.by_role(VRX)
        if not txs or not rxs:
            return None
        dist, bear_tx, bear_rx, pl = self._pair_matrices(txs, rxs)
        return _WorldGeometry(
            tx_index={v.id: k for k, v in enumerate(txs)},
            rx_index={v.id: k for k, v in enumerate(rxs)},
            dist=dist, bear_tx=bear_tx, bear_rx=bear_rx, pathloss=pl)

    @staticmethod
    def _offsets(bear: np.ndarray, steer: np.ndarray, axis: int) -> np.ndarray:
        """Absolute angle between bearings and per-link steering; ``axis``
        selects whether steering indexes rows (tx) or columns (rx)."""
        steer = steer[:, None] if axis == 0 else steer[None, :]
        return np.abs(np.remainder(bear - steer + np.pi, 2 * np.pi) - np.pi)

    def _make_links(self, matching: dict[int, int], phi_tx: dict[int, float],
                    phi_rx: dict[int, float]) -> list[LinkState]:
        vehicles = self._vehicle_map()
        links = []
        for tx_id in sorted(matching):
            rx_id = matching[tx_id]
            steer = bearing(vehicles[tx_id], vehicles[rx_id])
            links.append(LinkState(
                tx_id=tx_id, rx_id=rx_id,
                phi_tx=phi_tx[tx_id], phi_rx=phi_rx[tx_id],
                steer_tx=steer, steer_rx=wrap_angle(steer + math.pi),
                aligning=True))
        return links

    def _optimize_beamwidths(self, matching: dict[int, int]) -> tuple[dict, dict]:
        """PSO over the matched pairs on the scheduling-slot snapshot."""
        cfg = self.cfg
        order = sorted(matching)
        links = [LinkState(t, matching[t], 0.0, 0.0, 0.0, 0.0) for t in order]
        pl, bear_tx, bear_rx = self._link_geometry(links)
        steer_tx = np.diag(bear_tx)
        steer_rx = np.diag(bear_rx)
        off_tx = self._offsets(bear_tx, steer_tx, axis=0)
        off_rx = self._offsets(bear_rx, steer_rx, axis=1)
        psi = cfg.antenna.sector_beamwidth
        t_t = cfg.radio.transmission_slot
        tp = cfg.antenna.pilot_duration

        def fitness(position: np.ndarray) -> float:
            ptx = position[0::2]
            prx = position[1::2]
            power = radio.received_power_matrix(
                pl, off_tx, off_rx, ptx, prx, cfg.radio, cfg.antenna)
            sinr = radio.sinr_from_power(power, cfg.radio)
            tau = psi * psi / (ptx * prx) * tp
            rates = (1.0 - tau / t_t) * cfg.radio.bandwidth * np.log1p(sinr) / math.log(2)
            return float(rates.mean())

        result = pso_mod.optimize(fitness, len(order), cfg.pso, cfg.antenna,
                                  t_t, self.rng_pso)
        phi_tx = {t: float(result.position[2 * k]) for k, t in enumerate(order)}
        phi_rx = {t: float(result.position[2 * k + 1]) for k, t in enumerate(order)}
        return phi_tx, phi_rx

    def _schedule(self, t_slot: int) -> None:
        cfg = self.cfg
        method = cfg.method
        if method == "asyn":
            # Long-term pairs track their partner continuously (see the
            # per-slot re-steer in the transmission loop); tau was paid
            # once at pair formation, so scheduling slots are a no-op.
            self._record_pairing()
            return
        if method == "mind":
            matching = association.mind_pairing(
                self.highway.vehicles, cfg.highway.coverage_radius)
            phi = {t: cfg.fixed_beamwidth for t in matching}
            self.links = self._make_links(matching, phi, dict(phi))
        else:  # waf / pso
            if not self._bootstrapped or not self.records:
                matching = self.bootstrap_first_window()
                phi = {t: cfg.antenna.sector_beamwidth for t in matching}
                self.links = self._make_links(matching, phi, dict(phi))
                self._bootstrapped = True
            else:
                matching = self._learned_matching(t_slot)
                if method == "pso" and matching:
                    phi_tx, phi_rx = self._optimize_beamwidths(matching)
                else:
                    phi_tx = {t: cfg.fixed_beamwidth for t in matching}
                    phi_rx = dict(phi_tx)
                self.links = self._make_links(matching, phi_tx, phi_rx)
        self.records = {}
        self._record_pairing()

    def _record_pairing(self) -> None:
        n_vtx = len(self.highway.by_role(VTX))
        if n_vtx:
            self.bundle.pairing_fractions.append(len(self.links) / n_vtx)

    def _flush_windows(self) -> None:
        for vtx_id, win in self.windows.items():
            d_sch, gamma = scheduling_stats(win.slot_means, win.arrivals,
                                            win.delivered)
            if d_sch is not None:
                self.bundle.sched_points.append((d_sch, gamma))
        self.windows = {}

    # -- transmission-slot machinery ------------------------------------

    def _slot_rates(self, world: _WorldGeometry | None) -> dict[int, float]:
        """Per-transmitter achievable rate (bits/s) for the active links."""
        if not self.links or world is None:
            return {}
        cfg = self.cfg
        sel = np.ix_([world.tx_index[l.tx_id] for l in self.links],
                     [world.rx_index[l.rx_id] for l in self.links])
        pl = world.pathloss[sel]
        bear_tx = world.bear_tx[sel]
        bear_rx = world.bear_rx[sel]
        steer_tx = np.array([l.steer_tx for l in self.links])
        steer_rx = np.array([l.steer_rx for l in self.links])
        off_tx = self._offsets(bear_tx, steer_tx, axis=0)
        off_rx = self._offsets(bear_rx, steer_rx, axis=1)
        ptx = np.array([l.phi_tx for l in self.links])
        prx = np.array([l.phi_rx for l in self.links])
        power = radio.received_power_matrix(
            pl, off_tx, off_rx, ptx, prx, cfg.radio, cfg.antenna)
        sinr = radio.sinr_from_power(power, cfg.radio)
        base = cfg.radio.bandwidth * np.log1p(sinr) / math.log(2)
        rates = {}
        for k, link in enumerate(self.links):
            rate = base[k]
            if link.aligning:
                tau = radio.alignment_delay(link.phi_tx, link.phi_rx,
                                            cfg.antenna, cfg.radio.transmission_slot)
                rate = (1.0 - tau / cfg.radio.transmission_slot) * rate
                link.aligning = False
            rates[link.tx_id] = float(rate)
        return rates

    def _explore(self, t_slot: int, world: _WorldGeometry | None) -> None:
        if world is None:
            return
        cfg = self.cfg
        radius = cfg.highway.coverage_radius
        rx_ids = sorted(world.rx_index)
        tx_ids = np.array(sorted(world.tx_index, key=world.tx_index.get))
        neighbor_map = {
            rx: tx_ids[world.dist[:, world.rx_index[rx]] <= radius].tolist()
            for rx in rx_ids}
        pairing = association.explore_matching(rx_ids, neighbor_map,
                                               self.rng_explore)
        if not pairing:
            return
        order = sorted(pairing)              # rx ids
        sel = np.ix_([world.tx_index[pairing[r]] for r in order],
                     [world.rx_index[r] for r in order])
        pl = world.pathloss[sel]
        bear_tx = world.bear_tx[sel]
        bear_rx = world.bear_rx[sel]
        off_tx = self._offsets(bear_tx, np.diag(bear_tx), axis=0)
        off_rx = self._offsets(bear_rx, np.diag(bear_rx), axis=1)
        phi = np.full(len(order), cfg.matching.exploration_beamwidth)
        power = radio.received_power_matrix(
            pl, off_tx, off_rx, phi, phi, cfg.radio, cfg.antenna)
        sinr = radio.sinr_from_power(power, cfg.radio)
        for k, rx_id in enumerate(order):
            self.records.setdefault(rx_id, []).append(
                association.CsiRecord(slot=t_slot, tx_id=pairing[rx_id],
                                      sinr=float(sinr[k])))

    def _transmission_slot(self, t_slot: int) -> None:
        cfg = self.cfg
        t_t = cfg.radio.transmission_slot
        slot_start = t_slot * t_t
        slot_end = slot_start + t_t

        exited, entered = self.highway.advance(t_t)
        if exited:
            gone = {v.id for v in exited}
            for v in exited:
                if v.role == VTX:
                    self._retire_queue(v.id)
                self.records.pop(v.id, None)
                if self.asyn is not None:
                    self.asyn.on_exit(v.id)
            self.links = [l for l in self.links
                          if l.tx_id not in gone and l.rx_id not in gone]
        for v in entered:
            if v.role == VTX:
                self._ensure_queue(v.id)
            if self.asyn is not None:
                pair = self.asyn.on_entry(v, self.highway.vehicles)
                if pair is not None:
                    tx_id, rx_id = pair
                    phi = {tx_id: cfg.fixed_beamwidth}
                    self.links.extend(self._make_links({tx_id: rx_id}, phi, dict(phi)))

        if self.asyn is not None and self.links:
            # Long-term pairs know their partner and keep the beams on it.
            vehicles = self._vehicle_map()
            for link in self.links:
                steer = bearing(vehicles[link.tx_id], vehicles[link.rx_id])
                link.steer_tx = steer
                link.steer_rx = wrap_angle(steer + math.pi)

        world = self._world_geometry()
        rates = self._slot_rates(world)
        if rates:
            self.bundle.rate_samples.extend(rates.values())

        scheduling_next = (t_slot + 1) % self.cfg.slots_per_scheduling == 0
        for vtx_id in sorted(self.queues):
            queue = self.queues[vtx_id]
            rate = rates.get(vtx_id)
            delays = queue.serve(rate, slot_start, t_t) if rate else []
            if delays:
                self.bundle.delays.extend(delays)
            win = self.windows.setdefault(vtx_id, _Window())
            win.delivered += len(delays)
            win.slot_means.append(mean_delay(delays))

            k = int(self._arrival_rng(vtx_id).poisson(
                cfg.traffic.arrival_rate * t_t))
            if k > 0 or scheduling_next:
                queue.enforce_deadlines(slot_end, rate)
            else:
                queue.enforce_deadlines(slot_end, None)
            queue.add_arrivals(k, slot_end)
            win.arrivals += k

        if cfg.method in ("waf", "pso"):
            self._explore(t_slot, world)

    # -- top level -------------------------------------------------------

    def run(self) -> metrics.MetricsBundle:
        n = self.cfg.slots_per_scheduling
        for t_slot in range(self.cfg.total_slots):
            try:
                if t_slot % n == 0:
                    if t_slot > 0:
                        self._flush_windows()
                    self._schedule(t_slot)
                self._transmission_slot(t_slot)
            except Exception as exc:          # attach the slot index
                raise SimulationError(t_slot, exc) from exc
        self._flush_windows()
        for vtx_id in list(self.queues):
            self._retire_queue(vtx_id)
        return self.bundle


def run(cfg: SimConfig) -> metrics.MetricsBundle:
    return Simulation(cfg).run()
