"""Delay percentiles, throughput and per-run summaries.

Delays are reported in milliseconds. Percentiles use the nearest-rank rule
(no interpolation). Packets still queued when the run ends are excluded from
delay statistics and reported as ``residual_queue`` instead.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .mac import PacketRecord, SimResult
from .params import Deployment, SimParams


def nearest_rank(values, q: float) -> float:
    """Smallest sample with at least a fraction ``q`` of the samples at or below it."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("percentile of an empty sample")
    k = max(1, math.ceil(q * v.size - 1e-9))
    return float(np.partition(v, k - 1)[k - 1])


def delay_percentile(records: Iterable[PacketRecord], q: float) -> float:
    """Nearest-rank percentile of the delay of delivered packets, in ms."""
    delays = [(r.delivery_time - r.arrival_time) / 1000.0 for r in records if r.delivered]
    if not delays:
        raise ValueError("no delivered packets")
    return nearest_rank(delays, q)


@dataclass(frozen=True)
class StaSummary:
    sta: int
    generated: int
    delivered: int
    throughput: float               # bit/s
    delay_p50: float | None         # ms, None when nothing was delivered
    delay_p99: float | None
    mean_delay: float | None
    residual_queue: int


@dataclass(frozen=True)
class NetworkSummary:
    generated: int
    delivered: int
    throughput: float               # bit/s, sum over STAs
    delay_p50: float | None         # pooled over all delivered packets
    delay_p99: float | None
    mean_delay: float | None
    mean_sta_p99: float | None      # average of per-STA 99th percentiles
    residual_queue: int


def _mean(x: np.ndarray) -> float:
    # exactly rounded sum, so the result does not depend on record order
    return math.fsum(x.tolist()) / x.size


def _sta_summary(sta: int, delays_ms: np.ndarray, generated: int, params: SimParams) -> StaSummary:
    n = int(delays_ms.size)
    thr = n * params.frame_length_bits / params.sim_duration_s
    if n == 0:
        return StaSummary(sta, generated, 0, thr, None, None, None, generated)
    return StaSummary(sta, generated, n, thr, nearest_rank(delays_ms, 0.5),
                      nearest_rank(delays_ms, 0.99), _mean(delays_ms), generated - n)


def _network(stas: Sequence[StaSummary], pooled: np.ndarray) -> NetworkSummary:
    p99s = [s.delay_p99 for s in stas if s.delay_p99 is not None]
    has = pooled.size > 0
    return NetworkSummary(
        generated=sum(s.generated for s in stas),
        delivered=sum(s.delivered for s in stas),
        throughput=float(sum(s.throughput for s in stas)),
        delay_p50=nearest_rank(pooled, 0.5) if has else None,
        delay_p99=nearest_rank(pooled, 0.99) if has else None,
        mean_delay=_mean(pooled) if has else None,
        mean_sta_p99=float(np.mean(p99s)) if p99s else None,
        residual_queue=sum(s.residual_queue for s in stas),
    )


def summarize(records: Iterable[PacketRecord], deployment: Deployment,
              params: SimParams) -> tuple[list[StaSummary], NetworkSummary]:
    """Per-STA summaries and pooled network aggregates from packet records."""
    n = deployment.num_stas
    delays: list[list[float]] = [[] for _ in range(n)]
    generated = [0] * n
    for r in records:
        generated[r.sta] += 1
        if r.delivered:
            delays[r.sta].append((r.delivery_time - r.arrival_time) / 1000.0)
    arrays = [np.asarray(d, dtype=float) for d in delays]
    stas = [_sta_summary(s, arrays[s], generated[s], params) for s in range(n)]
    return stas, _network(stas, np.concatenate(arrays) if arrays else np.empty(0))


def summarize_result(result: SimResult) -> tuple[list[StaSummary], NetworkSummary]:
    """Same as :func:`summarize`, working directly on the engine's arrays."""
    params = result.params
    if result.saturated:
        thr = result.throughput_per_sta()
        stas = [StaSummary(s, 0, int(c), float(t), None, None, None, 0)
                for s, (c, t) in enumerate(zip(result.delivered_count, thr))]
        return stas, _network(stas, np.empty(0))
    arrays = []
    stas = []
    for s, (arr, dl) in enumerate(zip(result.arrivals, result.delivery)):
        ok = dl >= 0
        d = (dl[ok] - arr[ok]) / 1000.0
        arrays.append(d)
        stas.append(_sta_summary(s, d, len(arr), params))
    return stas, _network(stas, np.concatenate(arrays))


def throughput_gain(policy_thr: float, baseline_thr: float) -> float:
    """Relative throughput gain, e.g. 2.84 for +284%."""
    return policy_thr / baseline_thr - 1.0


def delay_reduction(policy_delay: float, baseline_delay: float) -> float:
    """Fractional reduction of a delay statistic relative to the baseline."""
    return 1.0 - policy_delay / baseline_delay


STA_COLUMNS = [f.name for f in fields(StaSummary)]
NETWORK_COLUMNS = [f.name for f in fields(NetworkSummary)]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(round(float(v), 9))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_rows(path: str | Path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k)) for k in columns})


def sta_rows(key: dict, stas: Sequence[StaSummary]) -> list[dict]:
    return [{**key, **asdict(s)} for s in stas]
