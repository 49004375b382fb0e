"""Slotted CSMA/CA engine for DCF and coordinated spatial-reuse TXOPs.

Time is kept in integer microseconds. All APs are assumed to hear each
other (single contention domain); :func:`contention_domain` enforces that.

The channel alternates between idle periods (DIFS followed by backoff
slots) and busy periods (a collision of ``t_collision`` or one TXOP).
Backoff counters of APs that do not transmit are frozen while the channel
is busy and resume after the next DIFS.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import phy
from .grouping import GroupPlan
from .params import Deployment, SimParams
from .traffic import TrafficSpec, arrival_streams


class UnsupportedScenarioError(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class Event:
    time: int          # us
    sequence: int
    kind: str          # backoff_expiry | collision | txop_end | nav_release
    subject: int       # AP index
    txop_id: int = -1


@dataclass(frozen=True)
class PacketRecord:
    sta: int
    arrival_time: int      # us
    delivery_time: int     # us, -1 if still queued at the end
    txop_id: int
    delivered: bool


@dataclass(frozen=True)
class Txop:
    txop_id: int
    start: int
    end: int
    initiator: int                       # sharing AP
    coordinated: bool
    group: tuple[int, ...]               # STAs of the plan group that was triggered
    participants: tuple[tuple[int, int, int, int], ...]   # (ap, sta, mcs index, packets)


@dataclass
class SimResult:
    params: SimParams
    horizon: int
    end_time: int
    arrivals: list[np.ndarray] | None          # per STA, us
    delivery: list[np.ndarray] | None          # per STA, us, -1 if undelivered
    txop_of: list[np.ndarray] | None
    delivered_count: np.ndarray
    txops: list[Txop] = field(default_factory=list)
    collisions: list[tuple[int, int, tuple[int, ...]]] = field(default_factory=list)
    segments: list[tuple[str, int, int]] = field(default_factory=list)
    backoff_draws: list[tuple[int, int, int]] = field(default_factory=list)   # (ap, cw, value)
    events: list[Event] = field(default_factory=list)
    policy: str = "DCF"

    @property
    def saturated(self) -> bool:
        return self.arrivals is None

    def throughput_per_sta(self) -> np.ndarray:
        """Delivered bits per second of simulated horizon."""
        return self.delivered_count * self.params.frame_length_bits / (self.horizon * 1e-6)

    def records(self) -> list[PacketRecord]:
        if self.arrivals is None:
            raise ValueError("saturated runs have no per-packet records")
        out = []
        for s, (arr, dl, tx) in enumerate(zip(self.arrivals, self.delivery, self.txop_of)):
            for a, d, t in zip(arr.tolist(), dl.tolist(), tx.tolist()):
                out.append(PacketRecord(s, a, d, t, d >= 0))
        return out

    def generated_count(self) -> np.ndarray:
        return np.array([len(a) for a in self.arrivals])

    def queued_at_end(self) -> np.ndarray:
        return np.array([int(np.sum(d < 0)) for d in self.delivery])

    def write_event_log(self, path: str | Path, deployment: Deployment | None = None,
                        plan: GroupPlan | None = None) -> None:
        """JSON-lines log: one header, then segments, TXOPs, collisions, backoff draws.

        The deployment and plan are embedded in the header when given, so the
        post-hoc checkers can recompute SINRs and group membership.
        """
        with open(path, "w") as fh:
            header = {
                "type": "header", "policy": self.policy, "horizon": self.horizon,
                "deployment": deployment.to_dict() if deployment is not None else None,
                "plan": [list(g.stas) for g in plan.groups] if plan is not None else None,
                "end_time": self.end_time, "params": self.params.to_dict(),
                "generated": None if self.saturated else self.generated_count().tolist(),
                "delivered": self.delivered_count.tolist(),
                "queued": None if self.saturated else self.queued_at_end().tolist(),
            }
            fh.write(json.dumps(header) + "\n")
            for kind, a, b in self.segments:
                fh.write(json.dumps({"type": "segment", "kind": kind, "start": a, "end": b}) + "\n")
            for t in self.txops:
                fh.write(json.dumps({
                    "type": "txop", "id": t.txop_id, "start": t.start, "end": t.end,
                    "initiator": t.initiator, "coordinated": t.coordinated,
                    "group": list(t.group), "participants": [list(p) for p in t.participants],
                }) + "\n")
            for start, end, aps in self.collisions:
                fh.write(json.dumps({"type": "collision", "start": start, "end": end,
                                     "aps": list(aps)}) + "\n")
            for ap, cw, v in self.backoff_draws:
                fh.write(json.dumps({"type": "backoff", "ap": ap, "cw": cw, "value": v}) + "\n")


def contention_domain(deployment: Deployment, params: SimParams) -> np.ndarray:
    """Boolean AP adjacency: APs contend iff the AP-to-AP RSSI reaches the CCA level."""
    rss = phy.ap_rssi_matrix(deployment, params)
    adj = rss >= params.cca_threshold_dbm
    np.fill_diagonal(adj, False)
    n = len(adj)
    if not np.all(adj | np.eye(n, dtype=bool)):
        worst = float(np.min(rss[~np.eye(n, dtype=bool)]))
        raise UnsupportedScenarioError(
            f"APs do not form a single contention domain (weakest AP-AP RSSI {worst:.1f} dBm "
            f"< CCA {params.cca_threshold_dbm} dBm)"
        )
    return adj


def _to_us(streams: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [np.floor(np.asarray(s, dtype=float) * 1e6).astype(np.int64) for s in streams]


class _Backoff:
    """Uniform integer backoff draws taken from a buffered float stream."""

    def __init__(self, seed, record: list | None):
        self._rng = np.random.default_rng(seed)
        self._buf: list[float] = []
        self._record = record

    def draw(self, ap: int, cw: int) -> int:
        if not self._buf:
            self._buf = self._rng.random(4096).tolist()[::-1]
        v = int(self._buf.pop() * (cw + 1))
        if self._record is not None:
            self._record.append((ap, cw, v))
        return v


def simulate(deployment: Deployment, params: SimParams, traffic, seed,
             plan: GroupPlan | None = None, mcs_table=phy.DEFAULT_MCS_TABLE,
             traffic_seed=None, log: bool = False, mcs_mode: str = "active",
             mapc_overhead: str = "group", sta_selection: str = "fifo",
             member_backoff: str = "reset") -> SimResult:
    """Run one simulation; ``plan=None`` is plain DCF.

    ``traffic`` is ``None`` (all queues permanently backlogged), a
    :class:`TrafficSpec` (streams drawn from ``traffic_seed``, defaulting to
    ``seed``) or a list of per-STA arrival-time arrays in seconds.

    Engine options (defaults first):

    mcs_mode
        ``active``: MCS recomputed for the members that actually transmit;
        ``group``: every member keeps the MCS agreed for the full group.
    mapc_overhead
        ``group``: T_MAPC is paid when the triggered group has two or more
        pairs; ``active``: only when two or more APs transmit; ``always``:
        on every Co-SR TXOP, singletons included.
    sta_selection
        ``fifo``: the winner serves the STA holding its oldest packet;
        ``round_robin``: cycles over its backlogged STAs.
    member_backoff
        ``reset``: every AP that delivered in a TXOP restarts at CW_min with
        a fresh counter; ``cw``: members reset CW but keep their frozen
        counter; ``keep``: only the sharing AP resets.
    """
    for name, value, allowed in (("mcs_mode", mcs_mode, ("active", "group")),
                                 ("mapc_overhead", mapc_overhead, ("group", "active", "always")),
                                 ("sta_selection", sta_selection, ("fifo", "round_robin")),
                                 ("member_backoff", member_backoff, ("reset", "cw", "keep"))):
        if value not in allowed:
            raise ValueError(f"{name} must be one of {allowed}, got {value!r}")
    contention_domain(deployment, params)
    n_aps, n_stas = deployment.num_aps, deployment.num_stas
    horizon = int(round(params.sim_duration_s * 1e6))
    difs, slot, t_col = int(params.t_difs), int(params.t_empty_slot), int(params.t_collision)
    if (difs, slot, t_col) != (params.t_difs, params.t_empty_slot, params.t_collision):
        raise ValueError("DIFS, slot and collision durations must be whole microseconds")

    if plan is not None and plan.pairs() != set(deployment.pairs()):
        raise ValueError("plan does not match the deployment's AP-STA pairs")

    saturated = traffic is None
    if saturated:
        arrivals = None
    elif isinstance(traffic, TrafficSpec):
        ts_seed = seed if traffic_seed is None else traffic_seed
        arrivals = _to_us(arrival_streams(traffic, n_stas, params.sim_duration_s, ts_seed))
    else:
        arrivals = _to_us(traffic)
        if len(arrivals) != n_stas:
            raise ValueError("need one arrival stream per STA")
    arr_lists = None if saturated else [a.tolist() for a in arrivals]
    head = [0] * n_stas
    delivery = None if saturated else [np.full(len(a), -1, dtype=np.int64) for a in arrivals]
    txop_of = None if saturated else [np.full(len(a), -1, dtype=np.int64) for a in arrivals]
    delivered = np.zeros(n_stas, dtype=np.int64)

    stas_of = [deployment.stas_of(a) for a in range(n_aps)]
    rx = phy.rx_power_matrix(deployment, params)

    for ap, sta in deployment.pairs():
        m = phy.select_mcs(phy.sinr_from_rx(rx, sta, ap, (), params.noise_power_w), mcs_table)
        if m is None or phy.max_aggregation(m, params, coordinated=plan is not None) < 1:
            raise UnsupportedScenarioError(f"STA {sta} has no usable link to AP {ap}")

    dur_cache: dict[tuple[int, int, bool], int] = {}

    def duration(n: int, mcs: phy.McsEntry, coord: bool) -> int:
        key = (n, mcs.index, coord)
        d = dur_cache.get(key)
        if d is None:
            d = dur_cache[key] = phy.txop_duration(n, mcs, params, coord)
        return d

    link_cache: dict = {}

    def links_for(active: tuple[tuple[int, int], ...], group, coord: bool):
        """(ap, sta, mcs, max A-MPDU) for each transmitting pair."""
        key = (active, group.stas if group is not None else None, coord)
        out = link_cache.get(key)
        if out is not None:
            return out
        out = []
        if group is not None and mcs_mode == "group":
            for a, s in active:
                i = group.member(s)
                out.append((a, s, group.per_member_mcs[i], group.per_member_packets[i]))
        else:
            # MCS agreed for the set of APs that actually transmit
            aps = [a for a, _ in active]
            for a, s in active:
                m, _ = phy.link_mcs(rx, s, a, [b for b in aps if b != a], params, mcs_table)
                out.append((a, s, m, phy.max_aggregation(m, params, coord)))
        link_cache[key] = out
        return out

    def backlog(s: int, t: int) -> int:
        if saturated:
            return 1 << 30
        return bisect.bisect_right(arr_lists[s], t) - head[s]

    def first_pending(a: int) -> float:
        """Arrival time of the oldest undelivered packet at AP a (inf if none left)."""
        if saturated:
            return 0
        best = math.inf
        for s in stas_of[a]:
            if head[s] < len(arr_lists[s]):
                t = arr_lists[s][head[s]]
                if t < best:
                    best = t
        return best

    result = SimResult(params, horizon, 0, arrivals, delivery, txop_of, delivered,
                       policy=plan.policy if plan else "DCF")
    backoff = _Backoff(seed, result.backoff_draws if log else None)
    cw = [params.cw_min] * n_aps
    bo: list[int | None] = [None] * n_aps
    rr = [0] * n_aps
    pending_sta: list[int | None] = [None] * n_aps
    seq = 0
    t_free = 0

    def pick_sta(a: int, t: int) -> int:
        if sta_selection == "fifo" and not saturated:
            # STA whose head-of-line packet arrived first
            best, best_t = None, math.inf
            for s in stas_of[a]:
                if backlog(s, t) > 0 and arr_lists[s][head[s]] < best_t:
                    best, best_t = s, arr_lists[s][head[s]]
            if best is None:
                raise AssertionError("contending AP without backlog")
            return best
        stas = stas_of[a]
        k = len(stas)
        for i in range(k):
            s = stas[(rr[a] + i) % k]
            if backlog(s, t) > 0:
                return s
        raise AssertionError("contending AP without backlog")

    while True:
        e = t_free + difs
        ready = [0] * n_aps
        tx = [math.inf] * n_aps
        for a in range(n_aps):
            tau = first_pending(a)
            if tau == math.inf:
                continue
            r = 0 if tau <= e else -(-(tau - e) // slot)
            if bo[a] is None:
                bo[a] = backoff.draw(a, cw[a])
            ready[a] = r
            tx[a] = r + bo[a]
        kstar = min(tx)
        if kstar == math.inf:
            break
        ts = e + kstar * slot
        if ts >= horizon:
            break
        winners = [a for a in range(n_aps) if tx[a] == kstar]
        for a in range(n_aps):
            if tx[a] != math.inf and a not in winners and ready[a] <= kstar:
                bo[a] -= kstar - ready[a]
        if log:
            result.segments.append(("idle", t_free, ts))
            for a in winners:
                result.events.append(Event(ts, seq, "backoff_expiry", a))
                seq += 1

        if len(winners) > 1:
            for a in winners:
                if pending_sta[a] is None:
                    pending_sta[a] = pick_sta(a, ts)
                cw[a] = min(2 * cw[a] + 1, params.cw_max)
                bo[a] = None
            t_free = ts + t_col
            if log:
                result.collisions.append((ts, t_free, tuple(winners)))
                result.segments.append(("collision", ts, t_free))
                result.events.append(Event(t_free, seq, "collision", winners[0]))
                seq += 1
            continue

        w = winners[0]
        sta = pending_sta[w]
        # a coordinated TXOP of another AP may have drained the retained STA
        if sta is None or backlog(sta, ts) == 0:
            sta = pick_sta(w, ts)
        pending_sta[w] = None
        cw[w] = params.cw_min
        bo[w] = None
        k = len(stas_of[w])
        rr[w] = (stas_of[w].index(sta) + 1) % k

        if plan is None:
            group = None
            active = ((w, sta),)
            coord = False
        else:
            group = plan.groups[plan.group_index(w, sta)]
            active = tuple((a, s) for a, s in group.members if a == w or backlog(s, ts) > 0)
            if mapc_overhead == "always":
                coord = True
            elif mapc_overhead == "group":
                coord = group.size > 1
            else:
                coord = len(active) > 1
        group_stas = group.stas if group is not None else (sta,)
        members = links_for(active, group if coord else None, coord)

        txop_id = len(result.txops)
        sent = []
        dur = 0
        for a, s, m, nmax in members:
            n = min(backlog(s, ts), nmax)
            sent.append((a, s, m.index, n))
            dur = max(dur, duration(n, m, coord))
        t_end = ts + dur
        if member_backoff != "keep":
            # a successful exchange resets CW for every AP that transmitted,
            # not only the sharing AP; "reset" also redraws the counter
            for a, _, _, n in sent:
                if n > 0 and a != w:
                    cw[a] = params.cw_min
                    if member_backoff == "reset":
                        bo[a] = None
        for a, s, _, n in sent:
            delivered[s] += n
            if not saturated:
                h = head[s]
                delivery[s][h:h + n] = t_end
                txop_of[s][h:h + n] = txop_id
                head[s] = h + n
        result.txops.append(Txop(txop_id, ts, t_end, w, coord, tuple(group_stas), tuple(sent)))
        if log:
            result.segments.append(("txop", ts, t_end))
            result.events.append(Event(t_end, seq, "txop_end", w, txop_id))
            seq += 1
            busy = {a for a, *_ in sent}
            for a in range(n_aps):
                if a not in busy:
                    result.events.append(Event(t_end, seq, "nav_release", a, txop_id))
                    seq += 1
        t_free = t_end

    result.end_time = t_free
    return result


def run_dcf(deployment: Deployment, params: SimParams, traffic, seed, **kw) -> SimResult:
    return simulate(deployment, params, traffic, seed, plan=None, **kw)


def run_cosr(deployment: Deployment, params: SimParams, traffic, plan: GroupPlan, seed,
             **kw) -> SimResult:
    if plan is None:
        raise ValueError("Co-SR needs a group plan")
    return simulate(deployment, params, traffic, seed, plan=plan, **kw)
