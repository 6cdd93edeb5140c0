"""Latency, IE QoS, subchannel usage and spectral efficiency of an allocation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .channel import ChannelGains
from .errors import CoverageError, UsageError
from .linkmodel import PLV, PRV, Allocation, LinkBudgetParams, groupcast_sinr, ie_sinr, meets, rate, unicast_sinr

TOTAL_BANDWIDTH_HZ = 10e6
PAYLOAD_BYTES = 300


def subchannel_bandwidth(num_subchannels: int, total_hz: float = TOTAL_BANDWIDTH_HZ) -> float:
    return total_hz / num_subchannels


def link_latency(payload_bytes: float, sinr: float, subchannel_bandwidth_hz: float) -> float:
    """Transmission time in ms; ``inf`` when the link carries no rate."""
    if subchannel_bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    r = rate(sinr)
    if r == 0:
        return math.inf
    return payload_bytes * 8 / (r * subchannel_bandwidth_hz) * 1e3


def _sizes(gains: ChannelGains):
    offs = list(gains._offsets or ())
    ends = offs[1:] + [gains.num_vehicles]
    return [e - s for s, e in zip(offs, ends)]


def _segments(m, size, alloc: Allocation):
    """(g, receivers) for each groupcast segment of platoon ``m``."""
    if (m, PLV) not in alloc.groupcast:
        raise CoverageError(f"platoon {m} has no groupcast subchannel")
    r = alloc.prv.get(m)
    if r is None or (m, PRV) not in alloc.groupcast:
        return [(PLV, range(1, size))]
    return [(PLV, range(1, r + 1)), (PRV, range(r + 1, size))]


def _worst_groupcast_sinrs(alloc, gains, params):
    txs = alloc.transmitters(gains)
    out = {}
    for m, size in enumerate(_sizes(gains)):
        segs = []
        for g, receivers in _segments(m, size, alloc):
            if len(receivers) == 0:
                continue
            k = alloc.groupcast[(m, g)]
            segs.append((g, min(groupcast_sinr(m, g, j, k, alloc, gains, params, txs) for j in receivers)))
        out[m] = segs
    return out


def groupcast_latency(alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams,
                      payload_bytes=PAYLOAD_BYTES, bandwidth_hz=None) -> float:
    """Mean over platoons of PLV-segment plus PRV-segment latency (worst receiver of each)."""
    bw = bandwidth_hz or subchannel_bandwidth(65)
    worst = _worst_groupcast_sinrs(alloc, gains, params)
    if not worst:
        return 0.0
    per = [sum(link_latency(payload_bytes, s, bw) for _, s in segs) for segs in worst.values()]
    return sum(per) / len(per)


def unicast_latency(alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams,
                    payload_bytes=PAYLOAD_BYTES, bandwidth_hz=None) -> float:
    """Mean over platoons of sum_{j=1}^{V-2} sum_{i=j}^{V-2} L(i->i+1) / (V-2)."""
    bw = bandwidth_hz or subchannel_bandwidth(65)
    txs = alloc.transmitters(gains)
    per = []
    for m, size in enumerate(_sizes(gains)):
        hops = size - 2
        if hops < 1:
            continue
        lat = []
        for i in range(1, size - 1):
            k = alloc.unicast.get((m, i))
            if k is None:
                raise UsageError(f"unicast {i}->{i + 1} of platoon {m} has no subchannel")
            lat.append(link_latency(payload_bytes, unicast_sinr(m, i + 1, k, alloc, gains, params, txs), bw))
        # hop i appears in the chains starting at 1..i
        total = sum(n * L for n, L in enumerate(lat, start=1))
        per.append(total / hops)
    return sum(per) / len(per) if per else 0.0


def overall_latency(g: float, u: float) -> float:
    return (g + u) / 2


def qos_satisfaction_rate(alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams) -> float:
    """Share of sharing IEs whose uplink SINR meets delta_thr (1.0 when nobody shares)."""
    if not alloc.ie_share:
        return 1.0
    txs = alloc.transmitters(gains)
    good = sum(meets(ie_sinr(c, k, alloc, gains, params, txs), params.delta_thr) for c, k in alloc.ie_share.items())
    return good / len(alloc.ie_share)


def spectral_efficiency(alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams, scope="overall") -> float:
    """Sum of link rates over the number of in-scope subchannels (bit/s/Hz); NaN if none."""
    if scope not in ("overall", "groupcast-only"):
        raise ValueError(f"unknown scope {scope!r}")
    channels = alloc.groupcast_channels()
    if scope == "overall":
        channels = channels | alloc.unicast_channels()
    if not channels:
        return math.nan
    total = 0.0
    for segs in _worst_groupcast_sinrs(alloc, gains, params).values():
        total += sum(rate(s) for _, s in segs)
    if scope == "overall":
        txs = alloc.transmitters(gains)
        for (m, j), k in alloc.unicast.items():
            total += rate(unicast_sinr(m, j + 1, k, alloc, gains, params, txs))
    return total / len(channels)


@dataclass(frozen=True)
class MetricsReport:
    groupcast_latency_ms: float
    unicast_latency_ms: float
    overall_latency_ms: float
    qos_satisfaction_rate: float
    groupcast_subchannels: int
    total_subchannels: int
    groupcast_spectral_efficiency: float
    overall_spectral_efficiency: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, c) for c in self.columns()]

    def to_dict(self) -> dict:
        return asdict(self)

    def format(self) -> str:
        return "\n".join(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}" for k, v in self.to_dict().items())


def compute_metrics(alloc: Allocation, scenario, gains: ChannelGains, params: LinkBudgetParams | None = None,
                    payload_bytes=PAYLOAD_BYTES, total_bandwidth_hz=TOTAL_BANDWIDTH_HZ) -> MetricsReport:
    params = params or LinkBudgetParams()
    bw = subchannel_bandwidth(scenario.config.num_subchannels, total_bandwidth_hz)
    g = groupcast_latency(alloc, gains, params, payload_bytes, bw)
    if alloc.unicast or not scenario.unicast_pmvs():
        u = unicast_latency(alloc, gains, params, payload_bytes, bw)
    else:
        u = math.nan  # groupcast-only allocation
    return MetricsReport(
        groupcast_latency_ms=g,
        unicast_latency_ms=u,
        overall_latency_ms=overall_latency(g, u),
        qos_satisfaction_rate=qos_satisfaction_rate(alloc, gains, params),
        groupcast_subchannels=len(alloc.groupcast_channels()),
        total_subchannels=len(alloc.platoon_channels()),
        groupcast_spectral_efficiency=spectral_efficiency(alloc, gains, params, "groupcast-only"),
        overall_spectral_efficiency=spectral_efficiency(alloc, gains, params, "overall"),
    )
