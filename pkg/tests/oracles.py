"""Independent reference implementations used to check the package.

Nothing here imports the code under test except for plain data types.
"""
from __future__ import annotations

import math


def tgax_path_loss(d: float, fc_ghz: float, walls: int) -> float:
    """Enterprise path loss written out term by term with the math module."""
    pl = 40.05 + 20 * math.log10(fc_ghz / 2.4)
    if d <= 10:
        pl += 20 * math.log10(d)
    else:
        pl += 20 * math.log10(10) + 35 * math.log10(d / 10)
    return pl + 7 * walls


def phy_rate_bps(bits_per_subcarrier: float, n_sc=980, n_ss=2, t_sym_us=13.6) -> float:
    return n_sc * n_ss * bits_per_subcarrier / (t_sym_us * 1e-6)


def linear_sinr_db(signal_dbm: float, interferers_dbm: list[float], noise_w: float) -> float:
    mw = lambda x: 10 ** (x / 10)
    return 10 * math.log10(mw(signal_dbm) / (noise_w * 1e3 + sum(mw(i) for i in interferers_dbm)))


def nearest_rank_sorted(values, q: float) -> float:
    s = sorted(values)
    return s[max(1, math.ceil(q * len(s) - 1e-9)) - 1]


def set_partitions(items):
    """All set partitions of ``items`` via restricted-growth strings."""
    n = len(items)
    if n == 0:
        yield []
        return

    def rgs(prefix, m):
        if len(prefix) == n:
            yield prefix
            return
        for v in range(m + 2):
            yield from rgs(prefix + [v], max(m, v))

    for code in rgs([0], 0):
        blocks: dict[int, list] = {}
        for item, b in zip(items, code):
            blocks.setdefault(b, []).append(item)
        yield list(blocks.values())


def brute_force_objective(pairs, compatible, num_bss: int, max_size=None):
    """Best objective over all partitions whose blocks are all compatible.

    ``compatible(block)`` returns the per-member packet counts (or None) for
    a block given as a list of (ap, sta) pairs; the objective of a partition
    is the sum over pairs of log(p_tx(block) * n_pair).
    """
    best = -math.inf
    cache: dict = {}
    for part in set_partitions(list(pairs)):
        if max_size is not None and any(len(b) > max_size for b in part):
            continue
        blocks = []
        ok = True
        for b in part:
            key = tuple(sorted(b, key=lambda p: p[1]))
            if key not in cache:
                cache[key] = compatible(list(key))
            if cache[key] is None:
                ok = False
                break
            blocks.append((key, cache[key]))
        if not ok:
            continue
        g_count: dict[int, int] = {}
        for key, _ in blocks:
            for a in {a for a, _ in key}:
                g_count[a] = g_count.get(a, 0) + 1
        total = 0.0
        for key, pk in blocks:
            p = sum(1 / (num_bss * g_count[a]) for a in {a for a, _ in key})
            total += sum(math.log(p * n) for n in pk)
        best = max(best, total)
    return best


def dcf_single_link_throughput(n_pkts: int, frame_bits: int, cw_min: int, slot_us: float,
                               difs_us: float, txop_us: float) -> float:
    """Renewal cycle: DIFS, E[backoff] = CW_min/2 idle slots, then one TXOP."""
    cycle = difs_us + slot_us * cw_min / 2 + txop_us
    return n_pkts * frame_bits / (cycle * 1e-6)


def bell_number(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


# (bits per constellation symbol * coding rate, minimum SNR in dB) for MCS 0..13
MCS_ROWS = [(0.5, 2), (1.0, 5), (1.5, 8), (2.0, 11), (3.0, 15), (4.0, 18), (4.5, 20), (5.0, 23),
            (6.0, 27), (20 / 3, 30), (7.5, 33), (25 / 3, 35), (9.0, 37), (10.0, 38)]


def compatibility_oracle(ap_xy, sta_xy, association, gamma_db=15.0, p_dbm=10 * math.log10(200),
                         noise_w=3.2e-13, coordinated_data_us=5000 - 16 - 100 - 286):
    """Block -> per-member A-MPDU sizes (or None), computed from raw geometry.

    MCS follows each link's own SNR; concurrent members only have to clear
    the capture threshold.
    """
    def rx(a, s):
        d = math.dist(ap_xy[a], sta_xy[s])
        return p_dbm - tgax_path_loss(d, 6.0, min(int(d // 10), 2))

    def compat(block):
        aps = [a for a, _ in block]
        if len(set(aps)) != len(aps) or any(association[s] != a for a, s in block):
            return None
        out = []
        for a, s in block:
            others = [b for b in aps if b != a]
            if others and linear_sinr_db(rx(a, s), [rx(b, s) for b in others], noise_w) < gamma_db:
                return None
            snr = linear_sinr_db(rx(a, s), [], noise_w)
            usable = [bits for bits, thr in MCS_ROWS if thr <= snr]
            if not usable:
                return None
            symbols = math.floor(coordinated_data_us / 13.6)
            out.append(math.floor(symbols * 980 * 2 * usable[-1] / 12000 + 1e-9))
        return out

    return compat
