"""Particle swarm search over per-link (tx, rx) beamwidth pairs.

Positions have two dimensions per active link. Every particle starts at
the narrow-beam reference point; particle 0 keeps zero velocity so that
reference is always part of the evaluated set and the returned solution can
never be worse than it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import AntennaConfig, PsoConfig


@dataclass
class PsoResult:
    position: np.ndarray     # (2 * links,) beamwidths, radians
    fitness: float
    history: list[float]     # global best per iteration, non-decreasing


def repair_positions(pos: np.ndarray, antenna: AntennaConfig, t_t: float) -> np.ndarray:
    """Clamp to [min_beamwidth, sector] and restore the minimum beamwidth
    product by scaling both beamwidths of an offending link up to the
    constraint boundary."""
    psi = antenna.sector_beamwidth
    required = (antenna.pilot_duration / t_t) * psi * psi
    pos = np.clip(pos, antenna.min_beamwidth, psi)
    tx = pos[..., 0::2]
    rx = pos[..., 1::2]
    prod = tx * rx
    bad = prod < required
    if np.any(bad):
        scale = np.where(bad, np.sqrt(required / prod), 1.0)
        tx = np.clip(tx * scale, antenna.min_beamwidth, psi)
        rx = np.clip(rx * scale, antenna.min_beamwidth, psi)
        # If the upper clamp bit, push the partner dimension instead.
        prod = tx * rx
        short = prod < required
        rx = np.where(short, np.clip(required / tx, antenna.min_beamwidth, psi), rx)
        pos = pos.copy()
        pos[..., 0::2] = tx
        pos[..., 1::2] = rx
    return pos


def optimize(fitness: Callable[[np.ndarray], float], n_links: int,
             cfg: PsoConfig, antenna: AntennaConfig, t_t: float,
             rng: np.random.Generator) -> PsoResult:
    """Run the swarm for a fixed iteration budget and return the best
    feasible beamwidth vector (empty for zero links)."""
    if n_links == 0:
        return PsoResult(np.empty(0), float("-inf"), [])
    dims = 2 * n_links
    k = cfg.swarm_size
    pos = np.full((k, dims), cfg.init_beamwidth)
    pos = repair_positions(pos, antenna, t_t)
    vel = rng.uniform(cfg.velocity_init[0], cfg.velocity_init[1], size=(k, dims))
    vel[0] = 0.0
    fit = np.array([fitness(p) for p in pos])
    personal_best = pos.copy()
    personal_fit = fit.copy()
    g = int(np.argmax(fit))
    global_best = pos[g].copy()
    global_fit = float(fit[g])
    history = [global_fit]
    for _ in range(cfg.iterations):
        r_cog = rng.uniform(size=(k, dims))
        r_soc = rng.uniform(size=(k, dims))
        vel = (cfg.inertia * vel
               + cfg.cognitive * r_cog * (personal_best - pos)
               + cfg.social * r_soc * (global_best[None, :] - pos))
        pos = repair_positions(pos + vel, antenna, t_t)
        fit = np.array([fitness(p) for p in pos])
        improved = fit > personal_fit
        personal_best[improved] = pos[improved]
        personal_fit[improved] = fit[improved]
        g = int(np.argmax(personal_fit))
        if personal_fit[g] > global_fit:
            global_fit = float(personal_fit[g])
            global_best = personal_best[g].copy()
        history.append(global_fit)
    return PsoResult(global_best, global_fit, history)
