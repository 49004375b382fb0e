"""Path loss, link budget, MCS selection, rates and TXOP airtime."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .params import ConfigError, Deployment, SimParams


@dataclass(frozen=True)
class McsEntry:
    index: int
    modulation_bits: int      # bits per constellation symbol
    coding_rate: Fraction
    min_snr: float            # dB

    @property
    def bits_per_subcarrier(self) -> float:
        return self.modulation_bits * float(self.coding_rate)


# 802.11be MCS 0-13. The SNR thresholds are not part of the standard; these
# are the shipped defaults and can be replaced with load_mcs_table().
_DEFAULT_ROWS = [
    (0, 1, "1/2", 2.0),
    (1, 2, "1/2", 5.0),
    (2, 2, "3/4", 8.0),
    (3, 4, "1/2", 11.0),
    (4, 4, "3/4", 15.0),
    (5, 6, "2/3", 18.0),
    (6, 6, "3/4", 20.0),
    (7, 6, "5/6", 23.0),
    (8, 8, "3/4", 27.0),
    (9, 8, "5/6", 30.0),
    (10, 10, "3/4", 33.0),
    (11, 10, "5/6", 35.0),
    (12, 12, "3/4", 37.0),
    (13, 12, "5/6", 38.0),
]

DEFAULT_MCS_TABLE: tuple[McsEntry, ...] = tuple(
    McsEntry(i, m, Fraction(r), snr) for i, m, r, snr in _DEFAULT_ROWS
)


def validate_mcs_table(table: Sequence[McsEntry]) -> None:
    idx = [e.index for e in table]
    if idx != list(range(14)):
        raise ConfigError(f"MCS table must list indices 0..13 once in order, got {idx}")
    for a, b in zip(table, table[1:]):
        if not b.min_snr > a.min_snr:
            raise ConfigError(f"min_snr must increase with index (MCS {a.index} -> {b.index})")
        if not b.bits_per_subcarrier > a.bits_per_subcarrier:
            raise ConfigError(f"data rate must increase with index (MCS {a.index} -> {b.index})")


def load_mcs_table(path: str | Path) -> tuple[McsEntry, ...]:
    """Read rows ``index,modulation_bits,coding_rate,min_snr_db`` from a CSV file.

    Coding rates may be written as fractions (``5/6``) or decimals. Numbers
    are parsed with :class:`~decimal.Decimal`, never through the locale.
    Lines starting with ``#`` and a header row are skipped.
    """
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            if not rec[0].strip().lstrip("-").isdigit():
                continue  # header
            i, m, r, snr = (x.strip() for x in rec[:4])
            rate = Fraction(r) if "/" in r else Fraction(Decimal(r))
            rows.append(McsEntry(int(i), int(m), rate, float(Decimal(snr))))
    table = tuple(rows)
    validate_mcs_table(table)
    return table


def save_mcs_table(table: Iterable[McsEntry], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "modulation_bits", "coding_rate", "min_snr_db"])
        for e in table:
            w.writerow([e.index, e.modulation_bits, str(e.coding_rate), repr(e.min_snr)])


# --------------------------------------------------------------------------
# propagation

def wall_count(distance: float | np.ndarray, max_walls: int = 2):
    """One wall every 10 m, capped at ``max_walls``."""
    return np.minimum(np.floor(np.asarray(distance) / 10.0), max_walls)


def path_loss(distance, carrier_freq: float = 6.0, walls=None, max_walls: int = 2):
    """TGax enterprise path loss in dB (breakpoint at 10 m, 7 dB per wall).

    ``distance`` may be a scalar or an array. If ``walls`` is None the wall
    count follows :func:`wall_count`.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss needs a strictly positive distance")
    if walls is None:
        walls = wall_count(d, max_walls)
    pl = (
        40.05
        + 20.0 * np.log10(carrier_freq / 2.4)
        + 20.0 * np.log10(np.minimum(d, 10.0))
        + np.where(d > 10.0, 35.0 * np.log10(np.maximum(d, 10.0) / 10.0), 0.0)
        + 7.0 * np.asarray(walls, dtype=float)
    )
    return float(pl) if pl.ndim == 0 else pl


def rssi(tx_power_dbm, path_loss_db):
    return tx_power_dbm - path_loss_db


def dbm_to_w(dbm):
    return 10.0 ** ((np.asarray(dbm) - 30.0) / 10.0)


def rx_power_matrix(deployment: Deployment, params: SimParams) -> np.ndarray:
    """Received power in dBm, indexed [ap, sta]."""
    pl = path_loss(deployment.ap_sta_distances(), params.carrier_freq_ghz,
                   max_walls=params.max_walls)
    return rssi(params.tx_power_dbm, pl)


def ap_rssi_matrix(deployment: Deployment, params: SimParams) -> np.ndarray:
    """AP-to-AP received power in dBm; the diagonal is +inf."""
    d = deployment.ap_ap_distances()
    out = np.full(d.shape, np.inf)
    off = ~np.eye(len(d), dtype=bool)
    out[off] = rssi(params.tx_power_dbm,
                    path_loss(d[off], params.carrier_freq_ghz, max_walls=params.max_walls))
    return out


@dataclass(frozen=True)
class LinkBudget:
    rssi: float                     # dBm
    snr: float                      # dB
    sinr_under_interference: float  # dB
    distance: float                 # m
    walls: int


def sinr_from_rx(rx_dbm: np.ndarray, sta: int, serving_ap: int, interferer_aps: Iterable[int],
                 noise_w: float) -> float:
    """SINR in dB at ``sta`` given a precomputed [ap, sta] received-power matrix."""
    interferers = list(interferer_aps)
    if serving_ap in interferers:
        raise ValueError("serving AP cannot also be an interferer")
    signal = dbm_to_w(rx_dbm[serving_ap, sta])
    interference = float(np.sum(dbm_to_w(rx_dbm[interferers, sta]))) if interferers else 0.0
    return float(10.0 * np.log10(signal / (noise_w + interference)))


def link_mcs(rx_dbm: np.ndarray, sta: int, serving_ap: int, interferer_aps: Iterable[int],
             params: SimParams, mcs_table: Sequence[McsEntry] = None) -> tuple[McsEntry | None, float]:
    """MCS for a link given the concurrent transmitters, plus the SINR it sees.

    Returns ``(None, sinr)`` when the SINR is below the capture threshold
    with interferers present, or when no MCS is usable.
    """
    table = mcs_table or DEFAULT_MCS_TABLE
    interferers = list(interferer_aps)
    s = sinr_from_rx(rx_dbm, sta, serving_ap, interferers, params.noise_power_w)
    if interferers and s < params.capture_threshold_db:
        return None, s
    if params.mcs_selection == "snr" and interferers:
        basis = sinr_from_rx(rx_dbm, sta, serving_ap, (), params.noise_power_w)
    else:
        basis = s
    return select_mcs(basis, table), s


def sinr(receiver: int, serving_ap: int, interferer_aps: Iterable[int], deployment: Deployment,
         params: SimParams) -> float:
    return sinr_from_rx(rx_power_matrix(deployment, params), receiver, serving_ap,
                        interferer_aps, params.noise_power_w)


def link_budget(receiver: int, serving_ap: int, interferer_aps: Iterable[int],
                deployment: Deployment, params: SimParams) -> LinkBudget:
    rx = rx_power_matrix(deployment, params)
    dist = float(deployment.ap_sta_distances()[serving_ap, receiver])
    return LinkBudget(
        rssi=float(rx[serving_ap, receiver]),
        snr=sinr_from_rx(rx, receiver, serving_ap, (), params.noise_power_w),
        sinr_under_interference=sinr_from_rx(rx, receiver, serving_ap, interferer_aps,
                                             params.noise_power_w),
        distance=dist,
        walls=int(wall_count(dist, params.max_walls)),
    )


# --------------------------------------------------------------------------
# rates and airtime

def select_mcs(sinr_db: float, mcs_table: Sequence[McsEntry] = DEFAULT_MCS_TABLE) -> McsEntry | None:
    """Highest MCS whose threshold is met, or None if even MCS 0 fails."""
    best = None
    for entry in mcs_table:
        if entry.min_snr <= sinr_db:
            best = entry
        else:
            break
    return best


def bits_per_symbol(mcs: McsEntry, params: SimParams) -> float:
    return params.num_subcarriers * params.num_spatial_streams * mcs.bits_per_subcarrier


def data_rate(mcs: McsEntry, params: SimParams) -> float:
    """PHY rate in bit/s."""
    return bits_per_symbol(mcs, params) / (params.t_symbol * 1e-6)


def txop_overhead(params: SimParams, coordinated: bool) -> float:
    base = params.t_sifs + params.t_back
    return base + params.t_mapc if coordinated else base


def max_aggregation(mcs: McsEntry, params: SimParams, coordinated: bool) -> int:
    """Largest A-MPDU (in frames) whose exchange fits in the maximum TXOP.

    Counts whole OFDM symbols so that txop_duration() of the result never
    exceeds the TXOP limit.
    """
    t_data = params.t_txop_max - txop_overhead(params, coordinated)
    if t_data <= 0:
        return 0
    symbols = math.floor(t_data / params.t_symbol + 1e-9)
    return int(symbols * bits_per_symbol(mcs, params) // params.frame_length_bits)


def data_airtime(n_packets: int, mcs: McsEntry, params: SimParams) -> float:
    symbols = math.ceil(n_packets * params.frame_length_bits / bits_per_symbol(mcs, params) - 1e-9)
    return symbols * params.t_symbol


def txop_duration(n_packets: int, mcs: McsEntry, params: SimParams, coordinated: bool) -> int:
    """Airtime in whole microseconds of one A-MPDU + BACK exchange, overhead included."""
    n_max = max_aggregation(mcs, params, coordinated)
    if not 1 <= n_packets <= n_max:
        raise ValueError(f"n_packets={n_packets} outside [1, {n_max}] for MCS {mcs.index}")
    return math.ceil(txop_overhead(params, coordinated) + data_airtime(n_packets, mcs, params) - 1e-9)
