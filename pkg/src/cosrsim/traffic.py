"""Downlink arrival processes and load calibration."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .params import Deployment, SimParams


@dataclass(frozen=True)
class TrafficSpec:
    model: Literal["poisson", "bursty"]
    per_sta_rate: float           # packets/s, long-run mean
    t_on_mean_ms: float = 1.0
    t_off_mean_ms: float = 10.0

    def __post_init__(self):
        if self.model not in ("poisson", "bursty"):
            raise ValueError(f"unknown traffic model {self.model!r}")
        if not self.per_sta_rate > 0:
            raise ValueError("per_sta_rate must be positive")
        if self.model == "bursty" and (self.t_on_mean_ms <= 0 or self.t_off_mean_ms < 0):
            raise ValueError("ON mean must be positive and OFF mean non-negative")

    @property
    def on_rate(self) -> float:
        """Arrival rate while ON, scaled so the long-run mean is per_sta_rate."""
        if self.model == "poisson":
            return self.per_sta_rate
        return self.per_sta_rate * (self.t_on_mean_ms + self.t_off_mean_ms) / self.t_on_mean_ms

    @classmethod
    def from_params(cls, model: str, rate: float, params: SimParams) -> "TrafficSpec":
        return cls(model, rate, params.t_on_ms, params.t_off_ms)


@dataclass(frozen=True)
class Arrival:
    sta: int
    time: float   # s
    size: int     # bits


def poisson_arrivals(rate: float, horizon: float, seed) -> np.ndarray:
    """Arrival times in seconds on [0, horizon) with i.i.d. exponential gaps."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    rng = np.random.default_rng(seed)
    if horizon <= 0:
        return np.empty(0)
    chunks = []
    t = 0.0
    block = max(16, int(rate * horizon * 1.1) + 16)
    while True:
        times = t + np.cumsum(rng.exponential(1.0 / rate, size=block))
        chunks.append(times)
        t = times[-1]
        if t >= horizon:
            break
    out = np.concatenate(chunks)
    return out[out < horizon]


def on_off_periods(spec: TrafficSpec, horizon: float, rng: np.random.Generator) -> list[tuple[float, float]]:
    """ON intervals (start, end) in seconds of an alternating renewal process.

    The initial state is drawn from the stationary ON probability.
    """
    t_on = spec.t_on_mean_ms * 1e-3
    t_off = spec.t_off_mean_ms * 1e-3
    if t_off == 0:
        return [(0.0, horizon)]
    on = rng.random() < t_on / (t_on + t_off)
    t = 0.0
    periods = []
    while t < horizon:
        # exponential durations are memoryless, so no residual-life correction is needed
        if on:
            d = rng.exponential(t_on)
            periods.append((t, min(t + d, horizon)))
        else:
            d = rng.exponential(t_off)
        t += d
        on = not on
    return periods


def bursty_arrivals(spec: TrafficSpec, horizon: float, seed) -> np.ndarray:
    """ON/OFF modulated Poisson arrivals; nothing arrives during OFF periods."""
    rng = np.random.default_rng(seed)
    if horizon <= 0:
        return np.empty(0)
    periods = on_off_periods(spec, horizon, rng)
    lam = spec.on_rate
    out = []
    for start, end in periods:
        n = rng.poisson(lam * (end - start))
        if n:
            out.append(np.sort(rng.uniform(start, end, size=n)))
    return np.concatenate(out) if out else np.empty(0)


def arrival_streams(spec: TrafficSpec, num_stas: int, horizon: float, seed) -> list[np.ndarray]:
    """One independent stream per STA, each seeded from a child of ``seed``."""
    children = np.random.SeedSequence(seed).spawn(num_stas)
    if spec.model == "poisson":
        return [poisson_arrivals(spec.per_sta_rate, horizon, c) for c in children]
    return [bursty_arrivals(spec, horizon, c) for c in children]


def export_trace(streams: list[np.ndarray], path: str | Path, size_bits: int) -> None:
    """Write ``sta time_us size_bits`` lines, merged by timestamp."""
    rows = [(t, s) for s, times in enumerate(streams) for t in times]
    rows.sort()
    with open(path, "w") as fh:
        for t, s in rows:
            fh.write(f"{s} {t * 1e6:.3f} {size_bits}\n")


def import_trace(path: str | Path, num_stas: int) -> list[np.ndarray]:
    per_sta: list[list[float]] = [[] for _ in range(num_stas)]
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            s, t_us, _size = line.split()
            per_sta[int(s)].append(float(t_us) * 1e-6)
    return [np.array(sorted(x)) for x in per_sta]


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Calibration:
    rate: float                     # packets/s applied to every STA
    reference_sta: int
    reference_mcs: int
    saturated_throughput: tuple[float, ...]   # bit/s per STA


def calibrate_load(deployment: Deployment, params: SimParams, seed, load_fraction: float = 0.9,
                   mcs_table=None) -> Calibration:
    """Per-STA packet rate equal to ``load_fraction`` of the saturated DCF throughput
    of the STA with the lowest solo MCS (ties broken by lowest throughput)."""
    from . import mac, phy  # mac depends on this module

    table = mcs_table or phy.DEFAULT_MCS_TABLE
    rx = phy.rx_power_matrix(deployment, params)
    mcs_idx = []
    for ap, sta in deployment.pairs():
        snr = phy.sinr_from_rx(rx, sta, ap, (), params.noise_power_w)
        m = phy.select_mcs(snr, table)
        if m is None or phy.max_aggregation(m, params, coordinated=False) < 1:
            raise CalibrationError(f"STA {sta} has no usable link to AP {ap} (SNR {snr:.1f} dB)")
        mcs_idx.append(m.index)
    result = mac.run_dcf(deployment, params, None, seed, mcs_table=table)
    thr = result.throughput_per_sta()
    lowest = min(mcs_idx)
    ref = min((s for s in range(deployment.num_stas) if mcs_idx[s] == lowest), key=lambda s: (thr[s], s))
    rate = float(load_fraction * thr[ref] / params.frame_length_bits)
    return Calibration(rate, int(ref), int(lowest), tuple(float(x) for x in thr))
