"""Link reliability under Rayleigh fading and the relay-selection objective.

With a power fading factor beta ~ Exp(1) on top of the average gain, a link
succeeds when ``P * beta * h / (sigma2 + I) >= gamma``, which happens with
probability ``exp(-gamma * (sigma2 + I) / (P * h))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import ChannelGains
from .errors import ConstraintError, CoverageError, UsageError
from .linkmodel import PLV, PRV, Allocation, LinkBudgetParams, _interference, groupcast_sinr, meets


@dataclass(frozen=True)
class ReliabilityParams:
    gamma_thr: float
    theta_th: float = 0.9
    sigma2: float = LinkBudgetParams().sigma2

    def __post_init__(self):
        if not 0 < self.theta_th <= 1:
            raise ValueError("theta_th must lie in (0, 1]")
        if self.gamma_thr <= 0 or self.sigma2 < 0:
            raise ValueError("gamma_thr must be positive and sigma2 non-negative")

    @classmethod
    def from_link_budget(cls, p: LinkBudgetParams) -> "ReliabilityParams":
        return cls(gamma_thr=p.gamma_thr, theta_th=p.theta_th, sigma2=p.sigma2)


def _as_rel(params) -> ReliabilityParams:
    if isinstance(params, ReliabilityParams):
        return params
    return ReliabilityParams.from_link_budget(params)


def success_probability(p_tx: float, h_bar: float, interference: float, params) -> float:
    """P(SINR >= gamma_thr) for a Rayleigh-faded link."""
    params = _as_rel(params)
    if p_tx < 0 or h_bar < 0 or interference < 0:
        raise ValueError("power, gain and interference must be non-negative")
    if p_tx == 0 or h_bar == 0 or math.isinf(interference):
        return 0.0
    return math.exp(-params.gamma_thr * (params.sigma2 + interference) / (p_tx * h_bar))


def coverage_limit(m, alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams, size: int) -> int:
    """Farthest PMV index reached by the PLV before the first failing receiver (0 if none)."""
    k = alloc.groupcast.get((m, PLV))
    if k is None:
        return 0
    if any(g == PRV and mm not in alloc.prv for mm, g in alloc.groupcast):
        # relay subchannels without a relay yet cannot interfere with anyone
        alloc = alloc.copy()
        for key in [key for key in alloc.groupcast if key[1] == PRV and key[0] not in alloc.prv]:
            del alloc.groupcast[key]
    txs = alloc.transmitters(gains)
    n = 0
    for j in range(1, size):
        if not meets(groupcast_sinr(m, PLV, j, k, alloc, gains, params, txs), params.gamma_thr):
            break
        n = j
    return n


def _platoon_size(m, alloc: Allocation, gains: ChannelGains) -> int:
    offsets = gains._offsets
    if offsets is None:
        raise UsageError("gains carry no platoon layout")
    end = offsets[m + 1] if m + 1 < len(offsets) else gains.num_vehicles
    return end - offsets[m]


def _link_probability(m, tx_index, g_key, k, j, p, alloc, gains, params, txs):
    tx = gains.vehicle_node(m, tx_index)
    rx = gains.vehicle_node(m, j)
    interference = _interference(rx, k, alloc, gains, g_key, txs)
    return success_probability(p, gains.gain(tx, rx), interference, params)


def groupcast_reliability(m, j, alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams) -> float:
    """Success probability of the groupcast link that is meant to cover PMV ``j``.

    The PLV covers ``j`` when its average SINR there meets gamma_thr; otherwise
    the platoon's PRV must sit ahead of ``j`` and meet gamma_thr at ``j``.
    """
    txs = alloc.transmitters(gains)
    k0 = alloc.groupcast.get((m, PLV))
    if k0 is not None and meets(groupcast_sinr(m, PLV, j, k0, alloc, gains, params, txs), params.gamma_thr):
        return _link_probability(m, 0, ("groupcast", (m, PLV)), k0, j, alloc.groupcast_power[(m, PLV)],
                                 alloc, gains, params, txs)
    r = alloc.prv.get(m)
    k1 = alloc.groupcast.get((m, PRV))
    if r is not None and k1 is not None and r < j:
        if meets(groupcast_sinr(m, PRV, j, k1, alloc, gains, params, txs), params.gamma_thr):
            return _link_probability(m, r, ("groupcast", (m, PRV)), k1, j, alloc.groupcast_power[(m, PRV)],
                                     alloc, gains, params, txs)
    raise CoverageError(f"PMV {j} of platoon {m} is covered by neither its PLV nor a PRV")


def relay_objective(m, r_candidate: int, alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams) -> float:
    """Sum of groupcast and unicast success probabilities if PMV ``r_candidate`` relays.

    Receivers up to the candidate hear the PLV; the rest hear the candidate at
    the power and on the subchannel the allocation gives the PRV.  Unicast
    terms run over receivers 2..V-1 (PMV 1 is served by the groupcast only).
    """
    size = _platoon_size(m, alloc, gains)
    n_m = coverage_limit(m, alloc, gains, params, size)
    if not 1 <= r_candidate <= n_m:
        raise ConstraintError(f"(7b) relay candidate {r_candidate} outside PLV range 1..{n_m}")

    trial = alloc.copy()
    trial.prv[m] = r_candidate
    txs = trial.transmitters(gains)
    k0 = trial.groupcast[(m, PLV)]
    p0 = trial.groupcast_power[(m, PLV)]
    total = 0.0
    for j in range(1, size):
        if j <= r_candidate:
            total += _link_probability(m, 0, ("groupcast", (m, PLV)), k0, j, p0, trial, gains, params, txs)
        else:
            if (m, PRV) not in trial.groupcast:
                raise UsageError(f"platoon {m} needs a PRV subchannel to reach PMV {j}")
            k1 = trial.groupcast[(m, PRV)]
            p1 = trial.groupcast_power[(m, PRV)]
            total += _link_probability(m, r_candidate, ("groupcast", (m, PRV)), k1, j, p1, trial, gains, params, txs)
    for j in range(2, size):
        key = (m, j - 1)
        if key not in trial.unicast:
            raise UsageError(f"unicast {j - 1}->{j} of platoon {m} has no subchannel")
        total += _link_probability(m, j - 1, ("unicast", key), trial.unicast[key], j, trial.unicast_power[key],
                                   trial, gains, params, txs)
    return total


def interference_objective(alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams | None = None):
    """(sum of I/P over groupcast receivers, sum of I over unicast receivers).

    Groupcast receivers up to the PRV are attributed to the PLV, the others
    to the PRV; platoons without a PRV attribute every receiver to the PLV.
    """
    txs = alloc.transmitters(gains)
    offsets = gains._offsets or ()
    g_part = 0.0
    for m in range(len(offsets)):
        if (m, PLV) not in alloc.groupcast:
            continue
        size = _platoon_size(m, alloc, gains)
        r = alloc.prv.get(m)
        for j in range(1, size):
            g = PLV if (r is None or j <= r or (m, PRV) not in alloc.groupcast) else PRV
            k = alloc.groupcast[(m, g)]
            p = alloc.groupcast_power[(m, g)]
            interference = _interference(gains.vehicle_node(m, j), k, alloc, gains, ("groupcast", (m, g)), txs)
            g_part += interference / p if p > 0 else (math.inf if interference > 0 else 0.0)
    u_part = 0.0
    for (m, j), k in alloc.unicast.items():
        u_part += _interference(gains.vehicle_node(m, j + 1), k, alloc, gains, ("unicast", (m, j)), txs)
    return g_part, u_part
