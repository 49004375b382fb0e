"""Spatial-reuse group formation and the group scheduling optimizer.

A plan partitions every associated (AP, STA) pair into groups whose members
can transmit at the same time with every receiver's SINR at or above the
capture threshold. Among all such partitions the optimizer returns the one
maximizing the product, over pairs, of the packets each pair expects per
TXOP, ``p_tx(g) * n_i``. A group's quality is the sum of those terms:

    quality(g) = p_tx(g) * sum of per-member A-MPDU sizes
    p_tx(g)    = sum over APs a in g of 1 / (K * G_a)

and ``G_a`` is the number of plan groups that contain a pair of AP ``a``
(each AP wins contention with probability 1/K and then cycles round-robin
over its own groups).
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from . import phy
from .params import Deployment, SimParams

Policy = Literal["UNC", "MAX2"]

# beyond this many pairs the exact search is replaced by the greedy fallback
EXACT_PAIR_LIMIT = 16


class PlanError(RuntimeError):
    pass


@dataclass(frozen=True)
class PairLink:
    ap: int
    sta: int
    solo_mcs: phy.McsEntry
    solo_snr: float


@dataclass(frozen=True)
class SrGroup:
    members: tuple[tuple[int, int], ...]          # (ap, sta), sorted by sta
    per_member_mcs: tuple[phy.McsEntry, ...]
    per_member_sinr: tuple[float, ...]
    per_member_packets: tuple[int, ...]           # coordinated max A-MPDU size

    @property
    def stas(self) -> tuple[int, ...]:
        return tuple(s for _, s in self.members)

    @property
    def aps(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.members)

    @property
    def size(self) -> int:
        return len(self.members)

    def member(self, sta: int) -> int:
        return self.stas.index(sta)


@dataclass(frozen=True)
class GroupPlan:
    policy: str
    groups: tuple[SrGroup, ...]
    qualities: tuple[float, ...]
    objective: float
    num_bss: int
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        index = {}
        for gi, g in enumerate(self.groups):
            for pair in g.members:
                if pair in index:
                    raise PlanError(f"pair {pair} appears in more than one group")
                index[pair] = gi
        object.__setattr__(self, "_index", index)

    def group_index(self, ap: int, sta: int) -> int:
        try:
            return self._index[(ap, sta)]
        except KeyError:
            raise KeyError(f"pair (AP {ap}, STA {sta}) is not in the plan") from None

    def pairs(self) -> set[tuple[int, int]]:
        return set(self._index)

    def ap_group_counts(self) -> dict[int, int]:
        return ap_group_counts(self.groups)

    def digest(self) -> str:
        text = ";".join(",".join(map(str, g.stas)) for g in self.groups)
        return hashlib.sha1(f"{self.policy}|{text}".encode()).hexdigest()[:12]

    def to_lines(self) -> list[str]:
        """One line per group: members, MCS, SINR and quality."""
        lines = []
        for g, q in zip(self.groups, self.qualities):
            members = " ".join(f"AP{a}-STA{s}" for a, s in g.members)
            mcs = ",".join(str(m.index) for m in g.per_member_mcs)
            sinr = ",".join(f"{x:.2f}" for x in g.per_member_sinr)
            lines.append(f"{members}\tmcs={mcs}\tsinr_db={sinr}\tquality={q:.6g}")
        return lines

    def export(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n")


def plan_lookup(plan: GroupPlan, ap: int, sta: int) -> SrGroup:
    return plan.groups[plan.group_index(ap, sta)]


def ap_group_counts(groups: Sequence[SrGroup]) -> dict[int, int]:
    counts: dict[int, int] = {}
    for g in groups:
        for a in set(g.aps):
            counts[a] = counts.get(a, 0) + 1
    return counts


def pair_links(deployment: Deployment, params: SimParams,
               mcs_table=phy.DEFAULT_MCS_TABLE) -> list[PairLink]:
    rx = phy.rx_power_matrix(deployment, params)
    links = []
    for ap, sta in deployment.pairs():
        snr = phy.sinr_from_rx(rx, sta, ap, (), params.noise_power_w)
        links.append(PairLink(ap, sta, phy.select_mcs(snr, mcs_table), snr))
    return links


def evaluate_group(members: Sequence[tuple[int, int]], rx: np.ndarray, params: SimParams,
                   mcs_table=phy.DEFAULT_MCS_TABLE) -> SrGroup | None:
    """Build the group if every member is decodable with all others active, else None."""
    members = tuple(sorted(members, key=lambda p: p[1]))
    aps = [a for a, _ in members]
    if len(set(aps)) != len(aps):
        return None
    mcs, sinrs, pkts = [], [], []
    for ap, sta in members:
        others = [a for a in aps if a != ap]
        m, s = phy.link_mcs(rx, sta, ap, others, params, mcs_table)
        if m is None or s < params.capture_threshold_db:
            return None
        n = phy.max_aggregation(m, params, coordinated=True)
        if n < 1:
            return None
        mcs.append(m)
        sinrs.append(s)
        pkts.append(n)
    return SrGroup(members, tuple(mcs), tuple(sinrs), tuple(pkts))


def enumerate_compatible_groups(deployment: Deployment, params: SimParams,
                                max_size: int | None = None,
                                mcs_table=phy.DEFAULT_MCS_TABLE) -> list[SrGroup]:
    """Every compatible group (at most one pair per AP, size <= max_size).

    Compatibility is re-checked for each subset; it is not monotone in the
    member set.
    """
    rx = phy.rx_power_matrix(deployment, params)
    options = [[None] + [(ap, s) for s in deployment.stas_of(ap)] for ap in range(deployment.num_aps)]
    groups = []
    for combo in itertools.product(*options):
        members = [p for p in combo if p is not None]
        if not members or (max_size is not None and len(members) > max_size):
            continue
        g = evaluate_group(members, rx, params, mcs_table)
        if g is not None:
            groups.append(g)
    groups.sort(key=lambda g: (g.stas[0], -g.size, g.stas))
    return groups


def group_quality(group: SrGroup, ap_counts: dict[int, int], params: SimParams) -> float:
    return transmission_probability(group, ap_counts, params) * sum(group.per_member_packets)


def transmission_probability(group: SrGroup, ap_counts: dict[int, int], params: SimParams) -> float:
    return sum(1.0 / (params.num_bss * ap_counts[a]) for a in set(group.aps))


def plan_objective(groups: Sequence[SrGroup], params: SimParams) -> float:
    """Sum over pairs of log(p_tx of the pair's group * the pair's A-MPDU size)."""
    counts = ap_group_counts(groups)
    total = 0.0
    for g in groups:
        p = transmission_probability(g, counts, params)
        total += sum(math.log(p * n) for n in g.per_member_packets)
    return total


def _partition_key(groups: Sequence[SrGroup]) -> tuple:
    return tuple(sorted(g.stas for g in groups))


def _better(obj: float, key: tuple, best_obj: float, best_key: tuple | None) -> bool:
    tol = 1e-12 * max(1.0, abs(obj), abs(best_obj))
    if obj > best_obj + tol:
        return True
    return abs(obj - best_obj) <= tol and best_key is not None and key < best_key


def _exact_search(candidates: list[SrGroup], n_pairs: int, sta_pos: dict[int, int],
                  params: SimParams) -> list[SrGroup]:
    K = params.num_bss
    by_first: dict[int, list[SrGroup]] = {}
    masks = {}
    for g in candidates:
        m = 0
        for s in g.stas:
            m |= 1 << sta_pos[s]
        masks[id(g)] = m
        by_first.setdefault(sta_pos[g.stas[0]], []).append(g)

    containing: list[list[tuple[SrGroup, int]]] = [[] for _ in range(n_pairs)]
    for g in candidates:
        for s, n in zip(g.stas, g.per_member_packets):
            containing[sta_pos[s]].append((g, n))

    full = (1 << n_pairs) - 1
    best: dict = {"obj": -math.inf, "key": None, "groups": None}
    chosen: list[SrGroup] = []
    counts: dict[int, int] = {}

    def upper_bound(covered: int) -> float:
        ub = 0.0
        for g in chosen:
            p = sum(1.0 / (K * counts[a]) for a in set(g.aps))
            ub += sum(math.log(p * n) for n in g.per_member_packets)
        for i in range(n_pairs):
            if covered >> i & 1:
                continue
            best_i = -math.inf
            for g, n in containing[i]:
                if masks[id(g)] & covered:
                    continue
                p = sum(1.0 / (K * (counts.get(a, 0) + 1)) for a in set(g.aps))
                best_i = max(best_i, math.log(p * n))
            ub += best_i
        return ub

    def dfs(covered: int) -> None:
        if covered == full:
            obj = plan_objective(chosen, params)
            key = _partition_key(chosen)
            if best["groups"] is None or _better(obj, key, best["obj"], best["key"]):
                best.update(obj=obj, key=key, groups=list(chosen))
            return
        # prune only on strict inferiority so lexicographic ties are still visited
        if best["groups"] is not None:
            ub = upper_bound(covered)
            if ub < best["obj"] - 1e-9 * max(1.0, abs(best["obj"])):
                return
        first = next(i for i in range(n_pairs) if not covered >> i & 1)
        for g in by_first.get(first, []):
            m = masks[id(g)]
            if m & covered:
                continue
            chosen.append(g)
            for a in set(g.aps):
                counts[a] = counts.get(a, 0) + 1
            dfs(covered | m)
            for a in set(g.aps):
                counts[a] -= 1
            chosen.pop()

    dfs(0)
    if best["groups"] is None:
        raise PlanError("no feasible partition of the pair set")
    return best["groups"]


def _greedy(candidates: list[SrGroup], params: SimParams) -> list[SrGroup]:
    K = params.num_bss
    covered: set[int] = set()
    counts: dict[int, int] = {}
    chosen = []
    remaining = list(candidates)
    all_stas = {s for g in candidates for s in g.stas}
    while covered != all_stas:
        def score(g):
            p = sum(1.0 / (K * (counts.get(a, 0) + 1)) for a in set(g.aps))
            return sum(math.log(p * n) for n in g.per_member_packets)
        remaining = [g for g in remaining if not covered.intersection(g.stas)]
        g = max(remaining, key=lambda g: (score(g), tuple(-s for s in g.stas)))
        chosen.append(g)
        covered.update(g.stas)
        for a in set(g.aps):
            counts[a] = counts.get(a, 0) + 1
    return chosen


def optimize_plan(deployment: Deployment, params: SimParams, policy: Policy = "UNC",
                  mcs_table=phy.DEFAULT_MCS_TABLE) -> GroupPlan:
    """Best partition of all pairs into compatible groups for the given policy."""
    if policy not in ("UNC", "MAX2"):
        raise ValueError(f"unknown grouping policy {policy!r}")
    for link in pair_links(deployment, params, mcs_table):
        if link.solo_mcs is None or link.solo_snr < params.capture_threshold_db:
            raise PlanError(f"STA {link.sta} has no usable link to AP {link.ap} "
                            f"(SNR {link.solo_snr:.1f} dB)")
    max_size = 2 if policy == "MAX2" else None
    candidates = enumerate_compatible_groups(deployment, params, max_size, mcs_table)
    stas = sorted(s for _, s in deployment.pairs())
    sta_pos = {s: i for i, s in enumerate(stas)}
    if len(stas) <= EXACT_PAIR_LIMIT:
        groups = _exact_search(candidates, len(stas), sta_pos, params)
    else:
        groups = _greedy(candidates, params)
    groups = sorted(groups, key=lambda g: g.stas)
    counts = ap_group_counts(groups)
    qualities = tuple(group_quality(g, counts, params) for g in groups)
    return GroupPlan(policy, tuple(groups), qualities, plan_objective(groups, params), params.num_bss)


def singleton_plan(deployment: Deployment, params: SimParams,
                   mcs_table=phy.DEFAULT_MCS_TABLE) -> GroupPlan:
    """Every pair on its own. With the default engine settings this reproduces DCF."""
    rx = phy.rx_power_matrix(deployment, params)
    groups = [evaluate_group([p], rx, params, mcs_table) for p in deployment.pairs()]
    if any(g is None for g in groups):
        raise PlanError("some pair has no usable solo link")
    counts = ap_group_counts(groups)
    return GroupPlan("SINGLE", tuple(groups), tuple(group_quality(g, counts, params) for g in groups),
                     plan_objective(groups, params), params.num_bss)
