"""Groupcast resource allocation by greedy tripartite matching.

Every (IE, subchannel, groupcaster) triple whose IE can tolerate some
groupcast power gets a score ``x``: the largest power that keeps the IE's
uplink SINR at ``delta_thr`` (capped at ``P_max``).  Triples are sorted by
``x`` descending and accepted greedily while all three parties are free.
PLVs are matched first; platoons whose PLV then misses its tail pick a relay
(PRV) and the relays go through a second matching round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelGains
from .errors import InfeasibleError, ResourceExhaustedError
from .linkmodel import PLV, PRV, Allocation, LinkBudgetParams, groupcast_sinr, meets

ROLE_NAMES = {PLV: "PLV", PRV: "PRV"}

# an interference budget this small (relative to the noise) counts as none
_BUDGET_EPS = 1e-9


@dataclass(frozen=True)
class MatchTriple:
    ie: int
    subchannel: int
    owner: object  # (m, g) for groupcasters, cluster index for unicast clusters
    score: float
    virtual: bool = False

    def key(self):
        return (self.ie, self.subchannel, self.owner)

    def format(self) -> str:
        if isinstance(self.owner, tuple):
            m, g = self.owner
            owner = f"m{m} {ROLE_NAMES.get(g, g)}"
        else:
            owner = f"Q{self.owner}"
        ie = f"v{self.ie}" if self.virtual else f"c{self.ie}"
        return f"{ie} k{self.subchannel} {owner} {self.score:.6g}"


def power_upper_bound(c, k, owner_node, gains: ChannelGains, params: LinkBudgetParams):
    """Largest groupcast power from ``owner_node`` that leaves IE ``c`` at delta_thr.

    Returns None when the IE misses delta_thr even without any sharing.
    Average gains do not depend on the subchannel, so ``k`` only names the slot.
    """
    ie_node = gains.ie_node(c)
    budget = params.p_max_ie * gains.gain(ie_node, gains.bs) / params.delta_thr - params.sigma2
    if budget <= _BUDGET_EPS * params.sigma2:
        return None
    h = gains.gain(owner_node, gains.bs)
    if h <= 0:
        return params.p_max_groupcast
    return min(params.p_max_groupcast, budget / h)


@dataclass
class _Owner:
    key: tuple
    node: int
    receivers: list  # vehicle nodes that must hear this groupcaster on the shared channel


def _candidate_arrays(owners, ies, channels, gains, params):
    """Feasible (c, owner) pairs with their score, vectorised over IEs."""
    if not owners or not ies or not channels:
        return np.empty(0, int), np.empty(0, int), np.empty(0)
    ies = np.asarray(sorted(ies), dtype=int)
    g = gains.matrix
    ie_nodes = gains.num_vehicles + ies
    budget = params.p_max_ie * g[ie_nodes, gains.bs] / params.delta_thr - params.sigma2
    c_idx, o_idx, xs = [], [], []
    for oi, owner in enumerate(owners):
        h = g[owner.node, gains.bs]
        x = np.minimum(params.p_max_groupcast, budget / h) if h > 0 else np.full(len(ies), params.p_max_groupcast)
        ok = budget > _BUDGET_EPS * params.sigma2
        if owner.receivers:
            rx = np.asarray(owner.receivers)
            signal = x[:, None] * g[owner.node, rx][None, :]
            noise = params.sigma2 + params.p_max_ie * g[np.ix_(ie_nodes, rx)]
            ok &= np.all(signal >= params.gamma_thr * noise * (1 - 1e-9), axis=1)
        sel = np.nonzero(ok)[0]
        c_idx.append(ies[sel])
        o_idx.append(np.full(len(sel), oi))
        xs.append(x[sel])
    return np.concatenate(c_idx), np.concatenate(o_idx), np.concatenate(xs)


def _expand(owners, ies, channels, gains, params):
    c, o, x = _candidate_arrays(owners, ies, channels, gains, params)
    ks = np.asarray(sorted(channels), dtype=int)
    n = len(c)
    cc = np.repeat(c, len(ks))
    oo = np.repeat(o, len(ks))
    xx = np.repeat(x, len(ks))
    kk = np.tile(ks, n)
    return cc, kk, oo, xx


def _sorted_order(c, k, o, x, descending=True):
    primary = -x if descending else x
    return np.lexsort((o, k, c, primary))


def _greedy(order, c, k, o, free_ies, free_channels, free_owners):
    """Scan once; accept when IE, channel and owner are all free.  Returns accepted indices."""
    free_ies, free_channels, free_owners = set(free_ies), set(free_channels), set(free_owners)
    accepted = []
    for i in order:
        if not free_owners:
            break
        ci, ki, oi = int(c[i]), int(k[i]), int(o[i])
        if ci in free_ies and ki in free_channels and oi in free_owners:
            accepted.append(int(i))
            free_ies.discard(ci)
            free_channels.discard(ki)
            free_owners.discard(oi)
    return accepted


def sort_candidates(candidates, descending=True):
    """Sort by score (descending by default), ties broken by (ie, subchannel, owner) ascending."""
    sign = -1.0 if descending else 1.0
    return sorted(candidates, key=lambda t: (sign * t.score, t.ie, t.subchannel, _owner_sort_key(t.owner)))


def _owner_sort_key(owner):
    return owner if isinstance(owner, tuple) else (owner,)


def resulted_matching(sorted_candidates, free_ies, free_channels, free_owners) -> list[MatchTriple]:
    """Greedy scan over an already sorted candidate list."""
    free_ies, free_channels, free_owners = set(free_ies), set(free_channels), set(free_owners)
    out = []
    for t in sorted_candidates:
        if not free_owners:
            break
        if t.ie in free_ies and t.subchannel in free_channels and t.owner in free_owners:
            out.append(t)
            free_ies.discard(t.ie)
            free_channels.discard(t.subchannel)
            free_owners.discard(t.owner)
    return out


def _plv_owners(scenario, gains):
    # a PLV sharing a channel must at least reach PMV 1 there
    return [
        _Owner((m, PLV), gains.vehicle_node(m, 0), [gains.vehicle_node(m, 1)])
        for m in range(scenario.num_platoons)
    ]


def _prv_owners(scenario, gains, relays):
    owners = []
    for m, r in enumerate(relays):
        if r is None:
            continue
        size = scenario.platoon_size(m)
        rx = [gains.vehicle_node(m, j) for j in range(r + 1, size)]
        owners.append(_Owner((m, PRV), gains.vehicle_node(m, r), rx))
    return owners


def _to_triples(owners, c, k, o, x, idx):
    return [MatchTriple(int(c[i]), int(k[i]), owners[int(o[i])].key, float(x[i])) for i in idx]


def plv_ie_ch_matching(scenario, gains: ChannelGains, params: LinkBudgetParams, channels=None, ies=None):
    """Every feasible (IE, subchannel, PLV) triple with its power bound."""
    channels = range(scenario.config.num_subchannels) if channels is None else channels
    ies = range(len(scenario.ies)) if ies is None else ies
    owners = _plv_owners(scenario, gains)
    c, k, o, x = _expand(owners, list(ies), list(channels), gains, params)
    return _to_triples(owners, c, k, o, x, range(len(c)))


def prv_ie_ch_matching(scenario, gains, relay_vector, free_ies, free_channels, params):
    """Feasible (IE, subchannel, PRV) triples for platoons that have a relay."""
    owners = _prv_owners(scenario, gains, relay_vector)
    c, k, o, x = _expand(owners, list(free_ies), list(free_channels), gains, params)
    return _to_triples(owners, c, k, o, x, range(len(c)))


def select_prvs(scenario, gains: ChannelGains, plv_matching: Allocation, params: LinkBudgetParams) -> list:
    """Walk each platoon from PMV 1; the last PMV before the first failure relays."""
    txs = plv_matching.transmitters(gains)
    relays = []
    for m in range(scenario.num_platoons):
        k = plv_matching.groupcast[(m, PLV)]
        r = None
        for j in range(1, scenario.platoon_size(m)):
            sinr = groupcast_sinr(m, PLV, j, k, plv_matching, gains, params, txs)
            if not meets(sinr, params.gamma_thr):
                if j == 1:
                    raise InfeasibleError(f"PLV of platoon {m} cannot reach PMV 1")
                r = j - 1
                break
        relays.append(r)
    return relays


def min_clean_power(tx_node, rx_nodes, gains: ChannelGains, params: LinkBudgetParams, cap=None):
    """Least noise-limited power meeting gamma_thr at every receiver, capped."""
    cap = params.p_max_groupcast if cap is None else cap
    if not rx_nodes:
        return 0.0
    h = gains.matrix[tx_node, np.asarray(rx_nodes)]
    need = float(np.max(params.gamma_thr * params.sigma2 / h))
    return min(cap, need)


@dataclass
class TmpgResult:
    allocation: Allocation
    relays: list
    matches: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    def __iter__(self):
        # allows ``alloc, relays = run_tmpg(...)``
        return iter((self.allocation, self.relays))

    @property
    def used_ies(self) -> set:
        return set(self.allocation.ie_share)

    @property
    def used_channels(self) -> set:
        return set(self.allocation.groupcast.values())


def _take_channel(free_channels: set, what: str) -> int:
    if not free_channels:
        raise ResourceExhaustedError(f"no free subchannel left for {what}")
    k = min(free_channels)
    free_channels.discard(k)
    return k


def _round(owners, free_ies, free_channels, gains, params, trace, label):
    c, k, o, x = _expand(owners, list(free_ies), list(free_channels), gains, params)
    order = _sorted_order(c, k, o, x, descending=True)
    accepted = _greedy(order, c, k, o, free_ies, free_channels, range(len(owners)))
    matches = _to_triples(owners, c, k, o, x, accepted)
    if trace is not None:
        trace.append(f"# {label} candidates (sorted)")
        trace.extend(t.format() for t in _to_triples(owners, c, k, o, x, order))
        trace.append(f"# {label} accepted")
        trace.extend(t.format() for t in matches)
    return matches


def run_tmpg(scenario, gains: ChannelGains, params: LinkBudgetParams | None = None, trace=False) -> TmpgResult:
    params = params or LinkBudgetParams()
    lines = [] if trace else None
    alloc = Allocation()
    free_ies = set(range(len(scenario.ies)))
    free_channels = set(range(scenario.config.num_subchannels))
    M = scenario.num_platoons

    def tail_nodes(m, start):
        return [gains.vehicle_node(m, j) for j in range(start, scenario.platoon_size(m))]

    owners = _plv_owners(scenario, gains)
    matches = _round(owners, free_ies, free_channels, gains, params, lines, "PLV")
    for t in matches:
        m, _ = t.owner
        alloc.assign_groupcast(m, PLV, t.subchannel, t.score)
        alloc.share_ie(t.ie, t.subchannel, params.p_max_ie)
        free_ies.discard(t.ie)
        free_channels.discard(t.subchannel)
    for m in range(M):
        if (m, PLV) not in alloc.groupcast:
            k = _take_channel(free_channels, f"the PLV of platoon {m}")
            p = min_clean_power(gains.vehicle_node(m, 0), tail_nodes(m, 1), gains, params)
            alloc.assign_groupcast(m, PLV, k, p)

    relays = select_prvs(scenario, gains, alloc, params)
    if lines is not None:
        lines.append("# relays")
        lines.append(" ".join("-1" if r is None else str(r) for r in relays))

    owners = _prv_owners(scenario, gains, relays)
    prv_matches = _round(owners, free_ies, free_channels, gains, params, lines, "PRV")
    for t in prv_matches:
        m, _ = t.owner
        alloc.assign_groupcast(m, PRV, t.subchannel, t.score)
        alloc.share_ie(t.ie, t.subchannel, params.p_max_ie)
        free_ies.discard(t.ie)
        free_channels.discard(t.subchannel)
    for m, r in enumerate(relays):
        if r is None:
            continue
        alloc.prv[m] = r
        if (m, PRV) not in alloc.groupcast:
            k = _take_channel(free_channels, f"the PRV of platoon {m}")
            p = min_clean_power(gains.vehicle_node(m, r), tail_nodes(m, r + 1), gains, params)
            alloc.assign_groupcast(m, PRV, k, p)
    return TmpgResult(alloc, relays, matches + prv_matches, lines or [])
