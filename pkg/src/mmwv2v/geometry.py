"""Highway scenario: vehicle placement, motion and geometric queries.

The scenario is a straight multi-lane segment. Vehicles move along +x at
the constant speed of their lane; the antenna sits at the body center and
all geometry is evaluated in 2-D plan view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import KMH_TO_MPS, HighwayConfig

VTX = "vTx"
VRX = "vRx"


class ScenarioInfeasibleError(RuntimeError):
    """Raised when the requested density cannot be placed with the headway."""


@dataclass(frozen=True)
class Vehicle:
    id: int
    role: str                # VTX or VRX
    lane: int
    x: float                 # longitudinal position, m
    y: float                 # lateral position (lane center), m
    speed: float             # km/h, equals the lane speed
    length: float
    width: float
    kind: str                # "car" or "truck"

    @property
    def speed_mps(self) -> float:
        return self.speed * KMH_TO_MPS


def lane_center(lane: int, cfg: HighwayConfig) -> float:
    return (lane + 0.5) * cfg.lane_width


def bearing(a: Vehicle, b: Vehicle) -> float:
    """Angle of the a->b direction, radians in (-pi, pi]."""
    return math.atan2(b.y - a.y, b.x - a.x)


def distance(a: Vehicle, b: Vehicle) -> float:
    return math.hypot(b.x - a.x, b.y - a.y)


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    out = math.fmod(theta + math.pi, 2 * math.pi)
    if out <= 0:
        out += 2 * math.pi
    return out - math.pi


def headway_ok(x: float, length: float, lane_vehicles: list[Vehicle],
               min_headway: float) -> bool:
    """Bumper-to-bumper gap check against every vehicle already in the lane."""
    for other in lane_vehicles:
        gap = abs(x - other.x) - (length + other.length) / 2.0
        if gap < min_headway:
            return False
    return True


def _draw_body(cfg: HighwayConfig, rng: np.random.Generator) -> tuple[str, float, float]:
    if rng.random() < cfg.car_truck_ratio:
        length, width = cfg.car_models[rng.integers(len(cfg.car_models))]
        return "car", length, width
    return "truck", *cfg.truck_model


class Highway:
    """Owns the vehicle population and the spawn/advance bookkeeping."""

    def __init__(self, cfg: HighwayConfig, rng: np.random.Generator):
        cfg.validate()
        self.cfg = cfg
        self.rng = rng
        self.vehicles: list[Vehicle] = []
        # placements deferred for lack of headway, tracked per role so the
        # vTx/vRx mix stays stationary under turnover
        self._deficits = {VTX: 0, VRX: 0}
        self._next_id = 0
        self._spawn_initial()

    # -- population ------------------------------------------------------

    def _new_id(self) -> int:
        self._next_id += 1
        return self._next_id - 1

    def _lanes_by_occupancy(self) -> list[int]:
        counts = [0] * self.cfg.lane_count
        for v in self.vehicles:
            counts[v.lane] += 1
        order = sorted(range(self.cfg.lane_count), key=lambda l: (counts[l], l))
        return order

    def _spawn_initial(self) -> None:
        cfg = self.cfg
        target = cfg.target_count
        # Stratified role assignment: exactly the configured share of
        # transmitters, randomly permuted over the placed vehicles.
        n_vtx = round(cfg.vtx_probability * target)
        roles = [VTX] * n_vtx + [VRX] * (target - n_vtx)
        self.rng.shuffle(roles)
        for _ in range(target):
            kind, length, width = _draw_body(cfg, self.rng)
            placed = False
            for lane in self._lanes_by_occupancy():
                lane_vehicles = [v for v in self.vehicles if v.lane == lane]
                for _attempt in range(200):
                    x = self.rng.uniform(0.0, cfg.segment_length)
                    if headway_ok(x, length, lane_vehicles, cfg.min_headway):
                        placed = True
                        break
                if placed:
                    break
            if not placed:
                raise ScenarioInfeasibleError(
                    f"cannot place {target} vehicles with min_headway="
                    f"{cfg.min_headway} on {cfg.segment_length} m")
            self.vehicles.append(Vehicle(
                id=self._new_id(), role=roles[len(self.vehicles)],
                lane=lane, x=x, y=lane_center(lane, cfg),
                speed=cfg.lane_speeds[lane], length=length, width=width, kind=kind))

    def _spawn_replacement(self, role: str) -> Vehicle | None:
        """Insert one vehicle near the segment entrance, least-crowded lane
        first; returns None when no lane admits the headway. The role is
        inherited from the exited vehicle being replaced."""
        cfg = self.cfg
        kind, length, width = _draw_body(cfg, self.rng)
        entry_span = max(cfg.min_headway, 1e-9)
        for lane in self._lanes_by_occupancy():
            lane_vehicles = [v for v in self.vehicles if v.lane == lane]
            for _attempt in range(20):
                x = self.rng.uniform(0.0, entry_span)
                if headway_ok(x, length, lane_vehicles, cfg.min_headway):
                    return Vehicle(
                        id=self._new_id(), role=role,
                        lane=lane, x=x, y=lane_center(lane, cfg),
                        speed=cfg.lane_speeds[lane], length=length, width=width,
                        kind=kind)
        return None

    def advance(self, dt_ms: float) -> tuple[list[Vehicle], list[Vehicle]]:
        """Move every vehicle by one step; returns (exited, entered)."""
        if dt_ms <= 0:
            raise ValueError("dt must be > 0")
        cfg = self.cfg
        moved = [replace(v, x=v.x + v.speed_mps * dt_ms / 1000.0)
                 for v in self.vehicles]
        exited = [v for v in moved if v.x > cfg.segment_length]
        self.vehicles = [v for v in moved if v.x <= cfg.segment_length]
        for v in exited:
            self._deficits[v.role] += 1
        entered: list[Vehicle] = []
        for role in (VTX, VRX):
            while self._deficits[role] > 0:
                newcomer = self._spawn_replacement(role)
                if newcomer is None:
                    break
                self.vehicles.append(newcomer)
                entered.append(newcomer)
                self._deficits[role] -= 1
        return exited, entered

    @property
    def deficit(self) -> int:
        return self._deficits[VTX] + self._deficits[VRX]

    # -- queries ---------------------------------------------------------

    def by_role(self, role: str) -> list[Vehicle]:
        return [v for v in self.vehicles if v.role == role]


def neighbors(v: Vehicle, vehicles: list[Vehicle], radius: float) -> list[Vehicle]:
    """Opposite-role vehicles within the closed coverage ball."""
    other_role = VRX if v.role == VTX else VTX
    return [u for u in vehicles
            if u.role == other_role and distance(v, u) <= radius]


# -- blockage ------------------------------------------------------------

def _segment_intersects_rect(p1x, p1y, p2x, p2y, cx, cy, hl, hw) -> bool:
    """Slab-clipping test of segment (p1,p2) against an axis-aligned
    rectangle centered at (cx, cy) with half extents (hl, hw)."""
    dx, dy = p2x - p1x, p2y - p1y
    tmin, tmax = 0.0, 1.0
    for p, d, lo, hi in ((p1x, dx, cx - hl, cx + hl),
                         (p1y, dy, cy - hw, cy + hw)):
        if abs(d) < 1e-12:
            if p < lo or p > hi:
                return False
        else:
            t1, t2 = (lo - p) / d, (hi - p) / d
            if t1 > t2:
                t1, t2 = t2, t1
            tmin, tmax = max(tmin, t1), min(tmax, t2)
            if tmin > tmax:
                return False
    return True


def count_blockers(tx: Vehicle, rx: Vehicle, vehicles: list[Vehicle]) -> int:
    """Vehicles whose body rectangle crosses the tx->rx antenna segment."""
    if tx.id == rx.id:
        raise ValueError("tx and rx must differ")
    n = 0
    for v in vehicles:
        if v.id in (tx.id, rx.id):
            continue
        if _segment_intersects_rect(tx.x, tx.y, rx.x, rx.y,
                                    v.x, v.y, v.length / 2.0, v.width / 2.0):
            n += 1
    return n


def blocker_matrix(txs: list[Vehicle], rxs: list[Vehicle],
                   vehicles: list[Vehicle]) -> np.ndarray:
    """Vectorized blocker counts for every (tx, rx) pair.

    Shape (len(txs), len(rxs)); entries for tx.id == rx.id are 0.
    """
    nt, nr, nv = len(txs), len(rxs), len(vehicles)
    counts = np.zeros((nt, nr), dtype=np.int64)
    if nt == 0 or nr == 0 or nv == 0:
        return counts
    p1x = np.array([v.x for v in txs])[:, None, None]
    p1y = np.array([v.y for v in txs])[:, None, None]
    p2x = np.array([v.x for v in rxs])[None, :, None]
    p2y = np.array([v.y for v in rxs])[None, :, None]
    cx = np.array([v.x for v in vehicles])[None, None, :]
    cy = np.array([v.y for v in vehicles])[None, None, :]
    hl = np.array([v.length / 2.0 for v in vehicles])[None, None, :]
    hw = np.array([v.width / 2.0 for v in vehicles])[None, None, :]

    # A vanishing direction component is replaced by a tiny slope: the slab
    # parameters then come out as huge same-sign (miss) or opposite-sign
    # (pass-through) values, which is exactly the parallel-case semantics.
    dx = p2x - p1x
    dy = p2y - p1y
    inv_x = 1.0 / np.where(np.abs(dx) < 1e-12, 1e-12, dx)
    inv_y = 1.0 / np.where(np.abs(dy) < 1e-12, 1e-12, dy)
    t1 = (cx - hl - p1x) * inv_x
    t2 = (cx + hl - p1x) * inv_x
    tmin = np.maximum(np.minimum(t1, t2), 0.0)
    tmax = np.minimum(np.maximum(t1, t2), 1.0)
    t1 = (cy - hw - p1y) * inv_y
    t2 = (cy + hw - p1y) * inv_y
    tmin = np.maximum(tmin, np.minimum(t1, t2))
    tmax = np.minimum(tmax, np.maximum(t1, t2))
    hit = tmin <= tmax
    tx_ids = np.array([v.id for v in txs])
    rx_ids = np.array([v.id for v in rxs])
    veh_ids = np.array([v.id for v in vehicles])
    hit &= veh_ids[None, None, :] != tx_ids[:, None, None]
    hit &= veh_ids[None, None, :] != rx_ids[None, :, None]
    return hit.sum(axis=2)
