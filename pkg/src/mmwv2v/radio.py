"""Channel, antenna and rate models for directional 60 GHz links.

Scalar functions back the per-link contracts; the ``*_matrix`` helpers are
vectorized equivalents used by the simulation loop, where the interference
sum couples every simultaneously transmitting pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import AntennaConfig, BlockageParams, RadioConfig

TWO_PI = 2.0 * math.pi


class BeamConstraintError(ValueError):
    """Beamwidth product too small for alignment to fit in one slot."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def noise_power_mw(radio: RadioConfig) -> float:
    """Thermal noise over the full band, in mW."""
    return dbm_to_mw(radio.noise_density) * radio.bandwidth


def channel_gain_db(s: float, blockers: int, params: BlockageParams) -> float:
    """Pathloss in dB for a link of length ``s`` meters with ``blockers``
    obstructing vehicles; includes the 15 dB/km atmospheric term."""
    if s <= 0:
        raise ValueError("link length must be > 0")
    delta, beta = params.lookup(blockers)
    return 10.0 * delta * math.log10(s) + beta + 15.0 * s / 1000.0


def mainlobe_gain(beamwidth: float, sidelobe: float) -> float:
    return (TWO_PI - (TWO_PI - beamwidth) * sidelobe) / beamwidth


def antenna_gain(alignment_error: float, beamwidth: float, sidelobe: float) -> float:
    """Sectored-pattern gain: mainlobe iff the error is within half the
    beamwidth (boundary inclusive), sidelobe otherwise."""
    if abs(alignment_error) <= beamwidth / 2.0:
        return mainlobe_gain(beamwidth, sidelobe)
    return sidelobe


def alignment_delay(phi_tx: float, phi_rx: float, antenna: AntennaConfig,
                    t_t: float) -> float:
    """Beam-sweep delay in ms; raises when the beamwidth product violates
    the tau <= T_t feasibility bound."""
    psi2 = antenna.sector_beamwidth * antenna.sector_beamwidth
    if phi_tx * phi_rx < (antenna.pilot_duration / t_t) * psi2 - 1e-12:
        raise BeamConstraintError(
            f"beamwidth product {phi_tx * phi_rx:.6f} below the "
            f"T_p/T_t feasibility bound")
    return psi2 / (phi_tx * phi_rx) * antenna.pilot_duration


def shannon_rate(sinr: float | np.ndarray, bandwidth: float) -> float | np.ndarray:
    return bandwidth * np.log2(1.0 + sinr)


def slot_rate(sinr, tau: float, radio: RadioConfig, aligning: bool):
    """Achievable rate in bits/s; the alignment penalty applies only on the
    first slot of a scheduling period."""
    base = shannon_rate(sinr, radio.bandwidth)
    if aligning:
        return (1.0 - tau / radio.transmission_slot) * base
    return base


# -- link state ----------------------------------------------------------

@dataclass
class LinkState:
    """An active vTx->vRx pair and its beam configuration.

    Steering directions are frozen at alignment time; alignment errors are
    the drift of the true bearings since then.
    """
    tx_id: int
    rx_id: int
    phi_tx: float
    phi_rx: float
    steer_tx: float          # tx boresight, world frame
    steer_rx: float
    aligning: bool = True    # charge tau on the next transmission slot


# -- vectorized interference core ---------------------------------------

def received_power_matrix(pathloss_db: np.ndarray,
                          offset_tx: np.ndarray, offset_rx: np.ndarray,
                          phi_tx: np.ndarray, phi_rx: np.ndarray,
                          radio: RadioConfig, antenna: AntennaConfig) -> np.ndarray:
    """Received power (mW) from transmitter z to receiver j for all (z, j).

    ``offset_tx[z, j]`` is the absolute angle between z's steering and the
    z->j bearing; ``offset_rx[z, j]`` the same at receiver j. ``phi_tx[z]``
    and ``phi_rx[j]`` are the beamwidths each endpoint currently uses.
    """
    g_sl = antenna.sidelobe_gain
    g_main_tx = (TWO_PI - (TWO_PI - phi_tx) * g_sl) / phi_tx
    g_main_rx = (TWO_PI - (TWO_PI - phi_rx) * g_sl) / phi_rx
    gtx = np.where(offset_tx <= phi_tx[:, None] / 2.0, g_main_tx[:, None], g_sl)
    grx = np.where(offset_rx <= phi_rx[None, :] / 2.0, g_main_rx[None, :], g_sl)
    p_mw = dbm_to_mw(radio.tx_power)
    return p_mw * gtx * 10.0 ** (-pathloss_db / 10.0) * grx


def sinr_from_power(power_mw: np.ndarray, radio: RadioConfig) -> np.ndarray:
    """Per-link SINR where link k pairs transmitter k with receiver k
    (``power_mw`` is square, diagonal = wanted signal)."""
    signal = np.diag(power_mw)
    interference = power_mw.sum(axis=0) - signal
    return signal / (interference + noise_power_mw(radio))


def sinr_single_link(s: float, blockers: int, theta_tx: float, theta_rx: float,
                     phi_tx: float, phi_rx: float,
                     radio: RadioConfig, antenna: AntennaConfig,
                     blockage: BlockageParams,
                     interferers: list[tuple[float, int, float, float, float, float]] = ()) -> float:
    """Scalar SINR for one receiver; interferers are tuples of
    (distance, blockers, offset_tx, offset_rx, phi_tx, phi_rx)."""
    g_sl = antenna.sidelobe_gain
    p_mw = dbm_to_mw(radio.tx_power)

    def rx_power(dist, blk, otx, orx, ptx, prx):
        pl = channel_gain_db(dist, blk, blockage)
        return (p_mw * antenna_gain(otx, ptx, g_sl)
                * db_to_linear(-pl) * antenna_gain(orx, prx, g_sl))

    signal = rx_power(s, blockers, theta_tx, theta_rx, phi_tx, phi_rx)
    interference = sum(rx_power(*entry) for entry in interferers)
    return signal / (interference + noise_power_mw(radio))
