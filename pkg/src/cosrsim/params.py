"""Simulation constants and multi-BSS deployment geometry.

All durations are stored in microseconds unless the field name says otherwise
(``t_txop_max_ms``, ``t_on_ms``, ``t_off_ms``, ``sim_duration_s``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

import numpy as np


class ConfigError(ValueError):
    """Raised for unknown configuration keys or values violating an invariant."""


@dataclass(frozen=True)
class SimParams:
    num_bss: int = 4                      # K
    stas_per_bss: int = 2                 # S_k
    inter_ap_distance: float = 10.0       # d_AP-AP [m], one of {10, 15, 20} in the experiments
    ap_sta_distance_range: tuple[float, float] = (1.0, 10.0)  # d_AP-STA [m]
    bandwidth_mhz: float = 80.0
    num_subcarriers: int = 980            # N_sc
    num_spatial_streams: int = 2          # N_ss
    carrier_freq_ghz: float = 6.0         # f_c
    t_ofdm: float = 12.8                  # us
    t_gi: float = 0.8                     # us
    t_txop_max_ms: float = 5.0
    t_mapc: float = 286.0                 # us
    t_back: float = 100.0                 # us
    t_sifs: float = 16.0                  # us
    t_difs: float = 34.0                  # us
    t_collision: float = 137.0            # us
    t_empty_slot: float = 9.0             # us
    cw_min: int = 15
    cw_max: int = 1023
    capture_threshold_db: float = 15.0    # gamma_CE
    tx_power_mw: float = 200.0            # P_max
    noise_power_w: float = 3.2e-13        # W
    cca_threshold_dbm: float = -82.0
    t_on_ms: float = 1.0
    t_off_ms: float = 10.0
    sim_duration_s: float = 5.0
    frame_length_bits: int = 12_000       # L
    max_walls: int = 2                    # W_n in {0, 1, 2}, one wall every 10 m
    # "snr": MCS from the link's own RSSI, interference only has to clear the
    # capture threshold; "sinr": MCS from the SINR under concurrent transmissions
    mcs_selection: str = "snr"

    def __post_init__(self) -> None:
        durations = (
            "t_ofdm", "t_gi", "t_txop_max_ms", "t_mapc", "t_back", "t_sifs",
            "t_difs", "t_collision", "t_empty_slot", "t_on_ms", "sim_duration_s",
        )
        for name in durations:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        if self.t_off_ms < 0:
            raise ConfigError("t_off_ms must be non-negative")
        for name in ("cw_min", "cw_max"):
            v = getattr(self, name)
            if v < 1 or (v + 1) & v:
                raise ConfigError(f"{name} must be of the form 2^n - 1, got {v}")
        if self.cw_min >= self.cw_max:
            raise ConfigError("cw_min must be smaller than cw_max")
        lo, hi = self.ap_sta_distance_range
        if lo < 1.0 or hi < lo:
            raise ConfigError(f"ap_sta_distance_range must satisfy 1 <= lo <= hi, got {(lo, hi)}")
        for name in ("num_bss", "stas_per_bss", "num_subcarriers", "num_spatial_streams",
                     "frame_length_bits"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.inter_ap_distance <= 0 or self.bandwidth_mhz <= 0 or self.carrier_freq_ghz <= 0:
            raise ConfigError("distances, bandwidth and carrier frequency must be positive")
        if self.tx_power_mw <= 0 or self.noise_power_w <= 0:
            raise ConfigError("powers must be positive")
        if self.mcs_selection not in ("snr", "sinr"):
            raise ConfigError(f"mcs_selection must be 'snr' or 'sinr', got {self.mcs_selection!r}")
        if self.max_walls < 0:
            raise ConfigError("max_walls must be non-negative")

    @property
    def t_txop_max(self) -> float:
        return self.t_txop_max_ms * 1000.0

    @property
    def t_symbol(self) -> float:
        return self.t_ofdm + self.t_gi

    @property
    def tx_power_dbm(self) -> float:
        return 10.0 * math.log10(self.tx_power_mw)

    @property
    def noise_power_dbm(self) -> float:
        return 10.0 * math.log10(self.noise_power_w * 1e3)

    @property
    def num_stas(self) -> int:
        return self.num_bss * self.stas_per_bss

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_FIELD_NAMES = {f.name for f in fields(SimParams)}

# Short aliases matching the symbols used in experiment configs.
ALIASES = {
    "K": "num_bss",
    "S_k": "stas_per_bss",
    "d_AP-AP": "inter_ap_distance",
    "d_AP-STA": "ap_sta_distance_range",
    "CW_min": "cw_min",
    "CW_max": "cw_max",
    "T_max": "t_txop_max_ms",
    "T_MAPC": "t_mapc",
    "gamma_CE": "capture_threshold_db",
    "L": "frame_length_bits",
    "T_sim": "sim_duration_s",
}


def _flatten(overrides: Mapping[str, Any]) -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in overrides.items():
        # nested sections ("phy: {t_ofdm: ...}") are merged into one namespace
        if isinstance(value, Mapping):
            for k, v in _flatten(value).items():
                if k in flat:
                    raise ConfigError(f"duplicate key {k!r}")
                flat[k] = v
        else:
            flat[ALIASES.get(key, key)] = value
    return flat


def make_params(overrides: Mapping[str, Any] | None = None, base: SimParams | None = None) -> SimParams:
    """Return the default parameter set with ``overrides`` applied.

    Keys may be field names or the aliases in :data:`ALIASES`; nested mappings
    are flattened so a config file can group fields into sections.
    """
    flat = _flatten(overrides or {})
    unknown = sorted(set(flat) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown parameter(s): {', '.join(unknown)}")
    if "ap_sta_distance_range" in flat:
        lo, hi = flat["ap_sta_distance_range"]
        flat["ap_sta_distance_range"] = (float(lo), float(hi))
    try:
        return replace(base or SimParams(), **flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class Deployment:
    """AP/STA coordinates in meters plus the STA -> AP association.

    STA ``s`` belongs to AP ``s // stas_per_bss``; STAs of one AP are contiguous.
    """

    ap_positions: np.ndarray
    sta_positions: np.ndarray
    association: tuple[int, ...]
    rng_seed: int | None = None
    stas_per_bss: int = field(default=2)

    @property
    def num_aps(self) -> int:
        return len(self.ap_positions)

    @property
    def num_stas(self) -> int:
        return len(self.sta_positions)

    def stas_of(self, ap: int) -> list[int]:
        return [s for s, a in enumerate(self.association) if a == ap]

    def pairs(self) -> list[tuple[int, int]]:
        """All associated (ap, sta) pairs, ordered by STA index."""
        return [(a, s) for s, a in enumerate(self.association)]

    def ap_sta_distances(self) -> np.ndarray:
        """Matrix [ap, sta] of Euclidean distances."""
        diff = self.ap_positions[:, None, :] - self.sta_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def ap_ap_distances(self) -> np.ndarray:
        diff = self.ap_positions[:, None, :] - self.ap_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def to_dict(self) -> dict[str, Any]:
        return {
            "ap_positions": self.ap_positions.tolist(),
            "sta_positions": self.sta_positions.tolist(),
            "association": list(self.association),
            "rng_seed": self.rng_seed,
            "stas_per_bss": self.stas_per_bss,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Deployment":
        return cls(np.asarray(d["ap_positions"], dtype=float),
                   np.asarray(d["sta_positions"], dtype=float),
                   tuple(int(a) for a in d["association"]), d.get("rng_seed"),
                   int(d.get("stas_per_bss", 2)))


def ap_square(params: SimParams) -> np.ndarray:
    """AP coordinates: corners of an axis-aligned square, row-major order."""
    if params.num_bss != 4:
        raise ConfigError("only the 4-AP square topology is supported")
    d = params.inter_ap_distance
    return np.array([[0.0, 0.0], [d, 0.0], [0.0, d], [d, d]])


def generate_deployment(params: SimParams, seed: int) -> Deployment:
    """Random deployment: each STA at a uniform distance and angle around its AP."""
    aps = ap_square(params)
    rng = np.random.default_rng(seed)
    n = params.num_stas
    lo, hi = params.ap_sta_distance_range
    radius = rng.uniform(lo, hi, size=n)
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    association = tuple(s // params.stas_per_bss for s in range(n))
    centers = aps[list(association)]
    stas = centers + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    return Deployment(aps, stas, association, rng_seed=seed, stas_per_bss=params.stas_per_bss)


# STA offsets (for the AP at the origin corner) of the symmetric example at
# d_AP-AP = 15 m: one STA pointing away from the square, one along its edge.
SYMMETRIC_EXAMPLE_OFFSETS = ((-3.0, 0.0), (0.0, -6.0))


def make_symmetric_deployment(
    params: SimParams, per_ap_sta_offsets: list[tuple[float, float]]
) -> Deployment:
    """Place the same STA pattern at every AP, rotated with the AP's corner.

    Offsets are given for the AP at the origin corner. The pattern at each
    other corner is the image under the 90 degree rotation about the scenario
    center that maps the origin corner onto it, so the whole deployment is
    invariant under quarter turns.
    """
    if len(per_ap_sta_offsets) != params.stas_per_bss:
        raise ConfigError(
            f"expected {params.stas_per_bss} offsets, got {len(per_ap_sta_offsets)}"
        )
    lo, hi = params.ap_sta_distance_range
    offsets = np.asarray(per_ap_sta_offsets, dtype=float)
    mags = np.hypot(offsets[:, 0], offsets[:, 1])
    bad = (mags < lo - 1e-12) | (mags > hi + 1e-12)
    if bad.any():
        raise ConfigError(f"offset magnitudes {mags[bad].tolist()} outside [{lo}, {hi}]")

    aps = ap_square(params)
    # quarter turns (counter-clockwise) taking corner (0, 0) to each row-major corner
    turns = {0: 0, 1: 1, 3: 2, 2: 3}
    stas = []
    for ap in range(len(aps)):
        k = turns[ap]
        c, s = round(math.cos(k * math.pi / 2)), round(math.sin(k * math.pi / 2))
        rot = np.array([[c, -s], [s, c]])
        stas.extend(aps[ap] + offsets @ rot.T)
    association = tuple(s // params.stas_per_bss for s in range(len(stas)))
    return Deployment(aps, np.array(stas), association, rng_seed=None,
                      stas_per_bss=params.stas_per_bss)


def symmetric_example(params: SimParams) -> Deployment:
    return make_symmetric_deployment(params, list(SYMMETRIC_EXAMPLE_OFFSETS))
