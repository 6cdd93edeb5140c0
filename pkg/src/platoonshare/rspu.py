"""Unicast resource sharing: cluster PMVs, then match clusters to IEs and subchannels.

PMVs that unicast to their follower are split into ``U`` clusters that keep
intra-cluster interference low and never hold two neighbours of the same
platoon.  Each cluster then needs one subchannel, which it shares with one
leftover IE (or a *virtual* IE, meaning the cluster gets the subchannel to
itself).  Candidates are sorted by total co-channel interference ascending
and accepted greedily.  ``U`` is then moved up or down until the clusters
just fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelGains
from .errors import PartitionInfeasible, ResourceExhaustedError
from .linkmodel import Allocation, LinkBudgetParams
from .tmpg import MatchTriple, resulted_matching

_RTOL = 1e-9


@dataclass
class ClusterSet:
    clusters: list  # list of lists of (m, j) transmitting PMVs

    @property
    def U(self) -> int:
        return len(self.clusters)

    def members(self):
        return [v for q in self.clusters for v in q]

    def nonempty(self):
        return [u for u, q in enumerate(self.clusters) if q]

    def as_sets(self):
        return [frozenset(q) for q in self.clusters]


@dataclass
class AdjustmentState:
    U: int
    f: int = 0
    extra: int = 0  # dedicated subchannels added while growing
    previous: object = None  # result of the previous round (S_pre)
    current: object = None

    def __post_init__(self):
        if self.f not in (0, 1, -1):
            raise ValueError("f must be 0, +1 or -1")


def clustering_adjustment(state: AdjustmentState, matched_all: bool, min_clusters: int = 1):
    """Advance the cluster-count search after one matching round.

    Returns ``(state, keep_going, restore_previous)``.
    """
    if state.f == 0:
        if not matched_all:
            state.f = 1
            state.U += 1
            state.extra += 1
            return state, True, False
        if state.U - 1 < min_clusters:
            return state, False, False
        state.f = -1
        state.U -= 1
        return state, True, False
    if state.f == 1:
        if matched_all:
            return state, False, False
        state.U += 1
        state.extra += 1
        return state, True, False
    # shrinking
    if not matched_all:
        return state, False, True
    if state.U - 1 < min_clusters:
        return state, False, False
    state.U -= 1
    return state, True, False


def _neighbour_index(pmvs):
    pos = {v: i for i, v in enumerate(pmvs)}
    out = []
    for m, j in pmvs:
        out.append([pos[n] for n in ((m, j - 1), (m, j + 1)) if n in pos])
    return out


def pairwise_interference(pmvs, gains: ChannelGains, power: float) -> np.ndarray:
    """W[a, b] = P*h(a->b) + P*h(b->a) between transmitting PMVs (zero diagonal)."""
    nodes = np.array([gains.vehicle_node(m, j) for m, j in pmvs], dtype=int)
    h = gains.matrix[np.ix_(nodes, nodes)]
    h = np.nan_to_num(h, nan=0.0)
    return power * (h + h.T)


def pm_partitioning(U: int, pmvs, gains: ChannelGains, rng, power: float | None = None, weights=None) -> ClusterSet:
    """Place PMVs one by one (random order) into the admissible cluster with least added interference."""
    if U < 1:
        raise ValueError("U must be >= 1")
    pmvs = list(pmvs)
    n = len(pmvs)
    if power is None:
        power = LinkBudgetParams().unicast_power
    W = pairwise_interference(pmvs, gains, power) if weights is None else weights
    nbrs = _neighbour_index(pmvs)
    acc = np.zeros((U, n))
    blocked = np.zeros((U, n), dtype=bool)
    clusters = [[] for _ in range(U)]
    for a in rng.permutation(n):
        a = int(a)
        cost = np.where(blocked[:, a], np.inf, acc[:, a])
        u = int(np.argmin(cost))
        if not np.isfinite(cost[u]):
            raise PartitionInfeasible(pmvs[a], U)
        clusters[u].append(pmvs[a])
        acc[u] += W[a]
        blocked[u, nbrs[a]] = True
    return ClusterSet(clusters)


def _cluster_arrays(cluster, gains):
    tx = np.array([gains.vehicle_node(m, j) for m, j in cluster], dtype=int)
    rx = np.array([gains.vehicle_node(m, j + 1) for m, j in cluster], dtype=int)
    return tx, rx


def _cluster_candidates(cluster, ies, num_virtual, gains, params):
    """Feasible IEs for one cluster and their total interference.

    Returns (real_mask over ``ies``, real_x, virtual_ok, virtual_x).
    """
    p = params.unicast_power
    g = gains.matrix
    tx, rx = _cluster_arrays(cluster, gains)
    if set(tx.tolist()) & set(rx.tolist()):
        # a member would interfere with its own neighbour's reception
        none = np.zeros(len(ies), dtype=bool)
        return none, np.zeros(len(ies)), False, 0.0
    signal = p * g[tx, rx]
    cross = p * g[np.ix_(tx, rx)]
    np.fill_diagonal(cross, 0.0)
    intra = cross.sum(axis=0)  # interference at each member's receiver
    thr = params.gamma_thr * (1 - _RTOL)
    virtual_ok = bool(np.all(signal >= thr * (params.sigma2 + intra)))
    virtual_x = float(intra.sum())
    if len(ies) == 0:
        return np.zeros(0, dtype=bool), np.zeros(0), virtual_ok, virtual_x
    ie_nodes = gains.num_vehicles + np.asarray(ies, dtype=int)
    ie_term = params.p_max_ie * g[np.ix_(ie_nodes, rx)]  # C x |Q|
    pmv_ok = np.all(signal[None, :] >= thr * (params.sigma2 + intra[None, :] + ie_term), axis=1)
    at_bs = p * g[tx, gains.bs].sum()
    ie_sinr = params.p_max_ie * g[ie_nodes, gains.bs] / (params.sigma2 + at_bs)
    ok = pmv_ok & (ie_sinr >= params.delta_thr * (1 - _RTOL))
    x = virtual_x + ie_term.sum(axis=1)
    return ok, x, virtual_ok, virtual_x


def candidate_clustering(ies, channels, clusters: ClusterSet, gains: ChannelGains, params: LinkBudgetParams,
                         num_virtual: int = 0, virtual_base: int | None = None) -> list[MatchTriple]:
    """Every feasible (IE, subchannel, cluster) triple scored by total co-channel interference.

    Virtual IEs get ids ``virtual_base .. virtual_base + num_virtual - 1``
    (default: right after the real IEs of the scenario).
    """
    ies = sorted(ies)
    if virtual_base is None:
        virtual_base = gains.num_ies
    out = []
    for u, q in enumerate(clusters.clusters):
        if not q:
            continue
        ok, x, v_ok, v_x = _cluster_candidates(q, ies, num_virtual, gains, params)
        for k in channels:
            for i, c in enumerate(ies):
                if ok[i]:
                    out.append(MatchTriple(int(c), int(k), u, float(x[i])))
            if v_ok:
                for i in range(num_virtual):
                    out.append(MatchTriple(virtual_base + i, int(k), u, v_x, virtual=True))
    return out


def sort_ascending(candidates):
    return sorted(candidates, key=lambda t: (t.score, t.ie, t.subchannel, t.owner))


def resulted_clustering(sorted_candidates, free_ies, free_channels, free_clusters) -> list[MatchTriple]:
    """Greedy accept-if-all-free scan over an ascending candidate list."""
    return resulted_matching(sorted_candidates, free_ies, free_channels, free_clusters)


def _match_round(clusters: ClusterSet, ies, num_virtual, channels, gains, params):
    """Compressed matching: gains do not depend on the subchannel, so a (c, u)
    pair accepted by the scan takes the lowest free subchannel.  This gives the
    same result as scanning the full (c, k, u) list."""
    ies = sorted(ies)
    vbase = gains.num_ies
    all_c = np.array(ies + [vbase + i for i in range(num_virtual)], dtype=int)
    cs, us, xs = [], [], []
    for u in clusters.nonempty():
        ok, x, v_ok, v_x = _cluster_candidates(clusters.clusters[u], ies, num_virtual, gains, params)
        sel = np.nonzero(ok)[0]
        cs.append(all_c[sel])
        xs.append(x[sel])
        if v_ok and num_virtual:
            cs.append(all_c[len(ies):])
            xs.append(np.full(num_virtual, v_x))
        us.append(np.full(sum(len(a) for a in cs) - sum(len(a) for a in us), u))
    if cs:
        c = np.concatenate(cs)
        x = np.concatenate(xs)
        u_arr = np.concatenate(us)
    else:
        c = x = u_arr = np.empty(0)
    order = np.lexsort((u_arr, c, x))
    free_c = set(all_c.tolist())
    free_u = set(clusters.nonempty())
    free_k = sorted(channels, reverse=True)
    out = []
    for i in order:
        if not free_u or not free_k:
            break
        ci, ui = int(c[i]), int(u_arr[i])
        if ci in free_c and ui in free_u:
            k = free_k.pop()
            out.append(MatchTriple(ci, k, ui, float(x[i]), virtual=ci >= vbase))
            free_c.discard(ci)
            free_u.discard(ui)
    return out


@dataclass
class RspuResult:
    allocation: Allocation
    clusters: ClusterSet
    matches: list
    iterations: int = 0
    trace: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.allocation, self.clusters))


def run_rspu(scenario, gains: ChannelGains, tmpg_result, params: LinkBudgetParams | None = None,
             rng=None, trace=False, max_rounds: int | None = None) -> RspuResult:
    params = params or LinkBudgetParams()
    rng = np.random.default_rng(0) if rng is None else rng
    lines = [] if trace else None
    groupcast = tmpg_result.allocation if hasattr(tmpg_result, "allocation") else tmpg_result
    used_ies = set(groupcast.ie_share)
    used_k = set(groupcast.groupcast.values()) | set(groupcast.unicast.values())
    ies = [c for c in range(len(scenario.ies)) if c not in used_ies]
    channels = [k for k in range(scenario.config.num_subchannels) if k not in used_k]
    if len(channels) < len(ies):
        raise ResourceExhaustedError(
            f"{len(channels)} free subchannels cannot host {len(ies)} remaining IEs"
        )
    pmvs = scenario.unicast_pmvs()
    n = len(pmvs)
    if n == 0:
        return RspuResult(Allocation(), ClusterSet([]), [], 0, lines or [])

    W = pairwise_interference(pmvs, gains, params.unicast_power)
    state = AdjustmentState(U=max(1, min(len(channels), n)))
    best = None
    rounds = 0
    limit = max_rounds or (4 * n + len(channels) + 8)
    while True:
        rounds += 1
        if rounds > limit:
            raise RuntimeError("cluster adjustment did not settle")
        u_eff = min(state.U, n)
        if u_eff > len(channels):
            raise ResourceExhaustedError(f"{u_eff} clusters need more than {len(channels)} free subchannels")
        try:
            clusters = pm_partitioning(u_eff, pmvs, gains, rng, weights=W)
        except PartitionInfeasible:
            clusters, matches, matched_all = None, [], False
        else:
            num_virtual = max(u_eff - len(ies), state.extra)
            matches = _match_round(clusters, ies, num_virtual, channels, gains, params)
            matched_all = len(matches) == len(clusters.nonempty())
        state.previous, state.current = state.current, (clusters, matches) if matched_all else None
        if lines is not None:
            lines.append(f"# round {rounds} U={u_eff} f={state.f} matched={len(matches)}"
                         f"/{len(clusters.nonempty()) if clusters else '-'}")
            lines.extend(t.format() for t in matches)
        if matched_all:
            best = (clusters, matches)
        state, go, restore = clustering_adjustment(state, matched_all)
        if restore:
            best = state.previous
        if not go:
            break
    if best is None:
        raise ResourceExhaustedError("no cluster count let every cluster find a subchannel")
    clusters, matches = best

    alloc = Allocation()
    for t in matches:
        for m, j in clusters.clusters[t.owner]:
            alloc.assign_unicast(m, j, t.subchannel, params.unicast_power)
        if not t.virtual:
            alloc.share_ie(t.ie, t.subchannel, params.p_max_ie)
    return RspuResult(alloc, clusters, matches, rounds, lines or [])
