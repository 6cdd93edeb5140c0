"""Reference allocators used for comparison.

Groupcast side: ``no_relay_allocate`` (PLV alone reaches the tail, one
subchannel per platoon) and ``centralized_allocate`` (always one relay, two
exclusive subchannels per platoon).  Unicast side: ``hraim_allocate``
(SINR-driven clusters that each pick the least harmful IE) and
``raa_allocate`` (random assignment with feasibility checks).
"""

from __future__ import annotations

import numpy as np

from .channel import ChannelGains
from .errors import ResourceExhaustedError
from .linkmodel import PLV, PRV, Allocation, LinkBudgetParams
from .tmpg import min_clean_power

_RTOL = 1e-9


def _free_channels(scenario, *allocs):
    used = set()
    for a in allocs:
        used |= a.platoon_channels()
    return [k for k in range(scenario.config.num_subchannels) if k not in used]


def _take(free: list, what: str) -> int:
    if not free:
        raise ResourceExhaustedError(f"no free subchannel left for {what}")
    return free.pop(0)


def required_plv_power(m, gains: ChannelGains, params: LinkBudgetParams, size: int, ie=None) -> float:
    """Least PLV power reaching every PMV of the platoon, optionally with IE ``ie`` interfering."""
    g = gains.matrix
    tx = gains.vehicle_node(m, 0)
    rx = np.array([gains.vehicle_node(m, j) for j in range(1, size)])
    noise = np.full(len(rx), params.sigma2)
    if ie is not None:
        noise = noise + params.p_max_ie * g[gains.ie_node(ie), rx]
    return float(np.max(params.gamma_thr * noise / g[tx, rx]))


def no_relay_allocate(scenario, gains: ChannelGains, params: LinkBudgetParams | None = None) -> Allocation:
    """One subchannel per platoon; the PLV alone covers the tail.

    Each PLV shares with the free IE that needs the least PLV power (if any
    IE lets it reach the tail within P_max).  The IE's own SINR is not
    checked.  Without such an IE the PLV takes an exclusive subchannel at
    the noise-limited power, clamped to P_max.
    """
    params = params or LinkBudgetParams()
    alloc = Allocation()
    free = _free_channels(scenario)
    free_ies = list(range(len(scenario.ies)))
    g = gains.matrix
    for m in range(scenario.num_platoons):
        size = scenario.platoon_size(m)
        k = _take(free, f"the PLV of platoon {m}")
        best = None
        if free_ies:
            tx = gains.vehicle_node(m, 0)
            rx = np.array([gains.vehicle_node(m, j) for j in range(1, size)])
            ie_nodes = gains.num_vehicles + np.array(free_ies)
            noise = params.sigma2 + params.p_max_ie * g[np.ix_(ie_nodes, rx)]
            need = np.max(params.gamma_thr * noise / g[tx, rx][None, :], axis=1)
            i = int(np.argmin(need))
            if need[i] <= params.p_max_groupcast * (1 + _RTOL):
                best = (free_ies[i], min(float(need[i]), params.p_max_groupcast))
        if best is not None:
            c, p = best
            alloc.assign_groupcast(m, PLV, k, p)
            alloc.share_ie(c, k, params.p_max_ie)
            free_ies.remove(c)
        else:
            p = required_plv_power(m, gains, params, size)
            alloc.assign_groupcast(m, PLV, k, min(p, params.p_max_groupcast))
    return alloc


def _segment_power(gains, params, m, tx_index, receivers):
    tx = gains.vehicle_node(m, tx_index)
    rx = [gains.vehicle_node(m, j) for j in receivers]
    return min_clean_power(tx, rx, gains, params, cap=np.inf)


def centralized_relay(m, gains: ChannelGains, params: LinkBudgetParams, size: int):
    """Relay index minimising max(PLV power, PRV power); ties go to the farther relay.

    Returns ``(r, plv_power, prv_power)`` with unclamped noise-limited powers.
    """
    best = None
    for r in range(1, max(1, size - 2) + 1):
        p1 = _segment_power(gains, params, m, 0, range(1, r + 1))
        p2 = _segment_power(gains, params, m, r, range(r + 1, size))
        score = max(p1, p2)
        if best is None or score <= best[0] * (1 + _RTOL):
            best = (score, r, p1, p2)
    _, r, p1, p2 = best
    return r, p1, p2


def centralized_allocate(scenario, gains: ChannelGains, params: LinkBudgetParams | None = None):
    """Every platoon gets a PRV and two exclusive subchannels.  Returns (alloc, relays)."""
    params = params or LinkBudgetParams()
    alloc = Allocation()
    free = _free_channels(scenario)
    relays = []
    for m in range(scenario.num_platoons):
        r, p1, p2 = centralized_relay(m, gains, params, scenario.platoon_size(m))
        alloc.assign_groupcast(m, PLV, _take(free, f"the PLV of platoon {m}"), min(p1, params.p_max_groupcast))
        alloc.assign_groupcast(m, PRV, _take(free, f"the PRV of platoon {m}"), min(p2, params.p_max_groupcast))
        alloc.prv[m] = r
        relays.append(r)
    return alloc, relays


# unicast side -------------------------------------------------------------


class _Links:
    """Node arrays for the transmitting PMVs."""

    def __init__(self, pmvs, gains):
        self.pmvs = list(pmvs)
        self.index = {v: i for i, v in enumerate(self.pmvs)}
        self.tx = np.array([gains.vehicle_node(m, j) for m, j in self.pmvs], dtype=int)
        self.rx = np.array([gains.vehicle_node(m, j + 1) for m, j in self.pmvs], dtype=int)

    def neighbours(self, a):
        m, j = self.pmvs[a]
        return [self.index[n] for n in ((m, j - 1), (m, j + 1)) if n in self.index]


def _member_sinrs(members, ie, links: _Links, gains, params):
    """SINR of each member link when the members (and IE ``ie``) share one subchannel."""
    g = gains.matrix
    p = params.unicast_power
    idx = np.asarray(members, dtype=int)
    tx, rx = links.tx[idx], links.rx[idx]
    cross = p * g[np.ix_(tx, rx)]
    np.fill_diagonal(cross, 0.0)
    interference = params.sigma2 + cross.sum(axis=0)
    if ie is not None:
        interference = interference + params.p_max_ie * g[gains.ie_node(ie), rx]
    return p * g[tx, rx] / interference


def _ok(sinrs, params):
    return sinrs >= params.gamma_thr * (1 - _RTOL)


def _intra_interference(members, links, gains, params):
    if len(members) < 2:
        return 0.0
    g = gains.matrix
    idx = np.asarray(members, dtype=int)
    cross = g[np.ix_(links.tx[idx], links.rx[idx])]
    np.fill_diagonal(cross, 0.0)
    return float(params.unicast_power * cross.sum())


def hraim_allocate(scenario, gains: ChannelGains, groupcast: Allocation, params: LinkBudgetParams | None = None) -> Allocation:
    """Clusters of mutually SINR-feasible PMVs, each sharing with its least harmful IE.

    Clusters are served in order of decreasing intra-cluster interference.
    When the chosen IE pushes members below gamma_thr, the fewest failing
    members (worst first) move to a new cluster that is served later.
    IE QoS is not checked.
    """
    params = params or LinkBudgetParams()
    if hasattr(groupcast, "allocation"):
        groupcast = groupcast.allocation
    links = _Links(scenario.unicast_pmvs(), gains)
    free_k = _free_channels(scenario, groupcast)
    free_ies = [c for c in range(len(scenario.ies)) if c not in groupcast.ie_share]
    g = gains.matrix

    clusters: list[list[int]] = []
    for a in range(len(links.pmvs)):
        for q in clusters:
            if any(n in q for n in links.neighbours(a)):
                continue
            if np.all(_ok(_member_sinrs(q + [a], None, links, gains, params), params)):
                q.append(a)
                break
        else:
            clusters.append([a])

    queue = sorted(clusters, key=lambda q: -_intra_interference(q, links, gains, params))
    alloc = Allocation()
    while queue:
        q = queue.pop(0)
        ie = None
        if free_ies:
            harm = params.p_max_ie * g[np.ix_(gains.num_vehicles + np.array(free_ies), links.rx[q])].sum(axis=1)
            ie = free_ies[int(np.argmin(harm))]
            sinr = _member_sinrs(q, ie, links, gains, params)
            failing = [q[i] for i in np.argsort(sinr, kind="stable") if not _ok(sinr[i], params)]
            if failing:
                if len(q) == 1:
                    ie = None  # a lone PMV that cannot share goes exclusive
                else:
                    if len(failing) == len(q):
                        failing = failing[:-1]  # keep the strongest member
                    for n_move in range(1, len(failing) + 1):
                        rest = [v for v in q if v not in failing[:n_move]]
                        if np.all(_ok(_member_sinrs(rest, ie, links, gains, params), params)):
                            break
                    moved = failing[:n_move]
                    queue.append(moved)
                    q = rest
                    if not np.all(_ok(_member_sinrs(q, ie, links, gains, params), params)):
                        ie = None
        k = _take(free_k, "a unicast cluster")
        for a in q:
            m, j = links.pmvs[a]
            alloc.assign_unicast(m, j, k, params.unicast_power)
        if ie is not None:
            alloc.share_ie(ie, k, params.p_max_ie)
            free_ies.remove(ie)
    return alloc


def raa_allocate(scenario, gains: ChannelGains, groupcast: Allocation, params: LinkBudgetParams | None = None,
                 rng: np.random.Generator | None = None) -> Allocation:
    """Random assignment: each PMV (random order) tries the free subchannels in random order.

    Leftover IEs sit on randomly drawn subchannels.  A PMV may join a
    subchannel when it is not a neighbour of a PMV already there and both its
    own SINR and every incumbent PMV's SINR stay at gamma_thr.  After one
    unsuccessful pass it takes an empty subchannel without an IE.
    """
    params = params or LinkBudgetParams()
    rng = np.random.default_rng(0) if rng is None else rng
    if hasattr(groupcast, "allocation"):
        groupcast = groupcast.allocation
    links = _Links(scenario.unicast_pmvs(), gains)
    channels = _free_channels(scenario, groupcast)
    ies = [c for c in range(len(scenario.ies)) if c not in groupcast.ie_share]
    perm = rng.permutation(len(channels))
    owner = {}
    for c, i in zip(ies, perm):
        owner[channels[int(i)]] = c
    members: dict = {k: [] for k in channels}

    def fits(a, k):
        q = members[k]
        if any(n in q for n in links.neighbours(a)):
            return False
        return bool(np.all(_ok(_member_sinrs(q + [a], owner.get(k), links, gains, params), params)))

    alloc = Allocation()
    for a in rng.permutation(len(links.pmvs)):
        a = int(a)
        chosen = None
        for i in rng.permutation(len(channels)):
            k = channels[int(i)]
            if fits(a, k):
                chosen = k
                break
        if chosen is None:
            spare = [k for k in channels if k not in owner and not members[k]]
            if not spare:
                raise ResourceExhaustedError(f"no subchannel can host PMV {links.pmvs[a]}")
            chosen = spare[0]
        members[chosen].append(a)
        m, j = links.pmvs[a]
        alloc.assign_unicast(m, j, chosen, params.unicast_power)
        if chosen in owner and owner[chosen] not in alloc.ie_share:
            alloc.share_ie(owner[chosen], chosen, params.p_max_ie)
    return alloc
