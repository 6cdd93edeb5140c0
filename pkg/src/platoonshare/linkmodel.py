"""Subchannel allocations and the SINR / rate of every link they create.

An :class:`Allocation` keeps the three assignment maps as dictionaries:

* ``unicast[(m, j)] = k``   PMV ``j`` of platoon ``m`` unicasts to PMV ``j+1`` on ``k``
* ``groupcast[(m, g)] = k`` the PLV (``g=0``) or PRV (``g=1``) of platoon ``m`` groupcasts on ``k``
* ``ie_share[c] = k``       IE ``c`` shares subchannel ``k`` with platoon links

Interference on a subchannel is the sum over every other transmitter holding
that subchannel, measured at the receiver in question.  Under the structural
constraints this reduces to the IE term for groupcast receivers, the PMV and
IE terms for unicast receivers, and the vehicle terms at the BS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .channel import ChannelGains, dbm_to_mw
from .errors import DomainError, InvariantError, UsageError

PLV, PRV = 0, 1

# relative slack used when comparing an SINR against its threshold
QOS_RTOL = 1e-9

STRUCTURAL_CODES = ("(7c)", "(7d)", "(7e)", "(7f)", "(7g)")
QOS_CODES = ("(7h)", "(7i)")


def meets(sinr: float, threshold: float) -> bool:
    return sinr >= threshold * (1.0 - QOS_RTOL)


@dataclass(frozen=True)
class LinkBudgetParams:
    """Thresholds and power limits, all linear (mW for powers)."""

    sigma2: float = dbm_to_mw(-114.0)
    gamma_thr: float = 10 ** (5 / 10)
    delta_thr: float = 2**0.5 - 1
    p_max_groupcast: float = dbm_to_mw(30.0)
    p_max_unicast: float = dbm_to_mw(17.0)
    p_max_ie: float = dbm_to_mw(30.0)
    theta_th: float = 0.9

    def __post_init__(self):
        for name in ("sigma2", "gamma_thr", "delta_thr", "p_max_groupcast", "p_max_unicast", "p_max_ie"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.theta_th <= 1:
            raise ValueError("theta_th must lie in (0, 1]")

    @property
    def unicast_power(self) -> float:
        return self.p_max_unicast

    @property
    def ie_power(self) -> float:
        return self.p_max_ie

    @classmethod
    def from_db(
        cls,
        noise_dbm=-114.0,
        gamma_thr_db=5.0,
        ie_qos_bps_hz=0.5,
        p_max_groupcast_dbm=30.0,
        p_max_unicast_dbm=17.0,
        p_max_ie_dbm=30.0,
        theta_th=0.9,
    ) -> "LinkBudgetParams":
        return cls(
            sigma2=dbm_to_mw(noise_dbm),
            gamma_thr=10 ** (gamma_thr_db / 10),
            delta_thr=2**ie_qos_bps_hz - 1,
            p_max_groupcast=dbm_to_mw(p_max_groupcast_dbm),
            p_max_unicast=dbm_to_mw(p_max_unicast_dbm),
            p_max_ie=dbm_to_mw(p_max_ie_dbm),
            theta_th=theta_th,
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class Tx(NamedTuple):
    kind: str  # "unicast" | "groupcast" | "ie"
    key: object
    node: int
    power: float


@dataclass
class Allocation:
    unicast: dict = field(default_factory=dict)
    groupcast: dict = field(default_factory=dict)
    ie_share: dict = field(default_factory=dict)
    unicast_power: dict = field(default_factory=dict)
    groupcast_power: dict = field(default_factory=dict)
    ie_power: dict = field(default_factory=dict)
    prv: dict = field(default_factory=dict)

    def assign_unicast(self, m, j, k, power):
        self.unicast[(m, j)] = k
        self.unicast_power[(m, j)] = power

    def assign_groupcast(self, m, g, k, power):
        self.groupcast[(m, g)] = k
        self.groupcast_power[(m, g)] = power

    def share_ie(self, c, k, power):
        self.ie_share[c] = k
        self.ie_power[c] = power

    def relay(self, m):
        return self.prv.get(m)

    def merge(self, other: "Allocation") -> "Allocation":
        out = self.copy()
        for name in ("unicast", "groupcast", "ie_share", "unicast_power", "groupcast_power", "ie_power", "prv"):
            getattr(out, name).update(getattr(other, name))
        return out

    def copy(self) -> "Allocation":
        return Allocation(
            dict(self.unicast),
            dict(self.groupcast),
            dict(self.ie_share),
            dict(self.unicast_power),
            dict(self.groupcast_power),
            dict(self.ie_power),
            dict(self.prv),
        )

    def groupcast_channels(self) -> set:
        return set(self.groupcast.values())

    def unicast_channels(self) -> set:
        return set(self.unicast.values())

    def platoon_channels(self) -> set:
        return self.groupcast_channels() | self.unicast_channels()

    def groupcaster_index(self, m, g) -> int:
        if g == PLV:
            return 0
        r = self.prv.get(m)
        if r is None:
            raise UsageError(f"platoon {m} has no PRV")
        return r

    def transmitters(self, gains: ChannelGains) -> dict:
        """Map subchannel -> list of :class:`Tx` holding it."""
        out: dict = {}
        for (m, j), k in self.unicast.items():
            out.setdefault(k, []).append(Tx("unicast", (m, j), gains.vehicle_node(m, j), self.unicast_power[(m, j)]))
        for (m, g), k in self.groupcast.items():
            node = gains.vehicle_node(m, self.groupcaster_index(m, g))
            out.setdefault(k, []).append(Tx("groupcast", (m, g), node, self.groupcast_power[(m, g)]))
        for c, k in self.ie_share.items():
            out.setdefault(k, []).append(Tx("ie", c, gains.ie_node(c), self.ie_power[c]))
        return out

    # serialisation for dumps
    def to_dict(self) -> dict:
        return {
            "unicast": [[m, j, k, self.unicast_power[(m, j)]] for (m, j), k in sorted(self.unicast.items())],
            "groupcast": [[m, g, k, self.groupcast_power[(m, g)]] for (m, g), k in sorted(self.groupcast.items())],
            "ie_share": [[c, k, self.ie_power[c]] for c, k in sorted(self.ie_share.items())],
            "prv": [[m, r] for m, r in sorted(self.prv.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Allocation":
        a = cls()
        for m, j, k, p in data.get("unicast", []):
            a.assign_unicast(int(m), int(j), int(k), float(p))
        for m, g, k, p in data.get("groupcast", []):
            a.assign_groupcast(int(m), int(g), int(k), float(p))
        for c, k, p in data.get("ie_share", []):
            a.share_ie(int(c), int(k), float(p))
        for m, r in data.get("prv", []):
            a.prv[int(m)] = int(r)
        return a


def _interference(rx: int, k, alloc: Allocation, gains: ChannelGains, exclude, txs=None) -> float:
    txs = alloc.transmitters(gains) if txs is None else txs
    total = 0.0
    for tx in txs.get(k, ()):
        if tx.key == exclude[1] and tx.kind == exclude[0]:
            continue
        total += tx.power * gains.gain(tx.node, rx)
    return total


def groupcast_sinr(m, g, j, k, alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams, txs=None) -> float:
    """SINR at PMV ``j`` of the groupcast sent by the PLV/PRV of platoon ``m``."""
    if alloc.groupcast.get((m, g)) != k:
        raise UsageError(f"subchannel {k} is not assigned to groupcaster {(m, g)}")
    i = alloc.groupcaster_index(m, g)
    rx = gains.vehicle_node(m, j)
    tx = gains.vehicle_node(m, i)
    p = alloc.groupcast_power[(m, g)]
    interference = _interference(rx, k, alloc, gains, ("groupcast", (m, g)), txs)
    return p * gains.gain(tx, rx) / (params.sigma2 + interference)


def unicast_sinr(m, j, k, alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams, txs=None) -> float:
    """SINR at PMV ``j`` of the unicast sent by PMV ``j-1`` of platoon ``m``."""
    tx_key = (m, j - 1)
    if alloc.unicast.get(tx_key) != k:
        raise UsageError(f"subchannel {k} is not assigned to unicast {tx_key}")
    if j - 1 < 1:
        raise UsageError("the PLV does not unicast; receivers start at PMV 2")
    for nb in (j - 2, j):
        if alloc.unicast.get((m, nb)) == k:
            raise InvariantError(f"adjacent PMVs {(m, j - 1)} and {(m, nb)} share subchannel {k}")
    rx = gains.vehicle_node(m, j)
    tx = gains.vehicle_node(m, j - 1)
    p = alloc.unicast_power[tx_key]
    interference = _interference(rx, k, alloc, gains, ("unicast", tx_key), txs)
    return p * gains.gain(tx, rx) / (params.sigma2 + interference)


def ie_sinr(c, k, alloc: Allocation, gains: ChannelGains, params: LinkBudgetParams, txs=None) -> float:
    """Uplink SINR of IE ``c`` at the BS on subchannel ``k``."""
    if alloc.ie_share.get(c) != k:
        raise UsageError(f"IE {c} is not on subchannel {k}")
    node = gains.ie_node(c)
    interference = _interference(gains.bs, k, alloc, gains, ("ie", c), txs)
    return alloc.ie_power[c] * gains.gain(node, gains.bs) / (params.sigma2 + interference)


def rate(sinr: float) -> float:
    """Spectral efficiency log2(1 + SINR) in bit/s/Hz."""
    if sinr < 0 or math.isnan(sinr):
        raise DomainError("SINR must be non-negative")
    return math.log2(1.0 + sinr)


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str

    def __str__(self):
        return f"{self.code} {self.detail}"


def validate_allocation(
    alloc: Allocation,
    scenario,
    gains: ChannelGains | None = None,
    params: LinkBudgetParams | None = None,
) -> list[Violation]:
    """Return every broken constraint; an empty list means the allocation is valid."""
    if gains is None:
        gains = ChannelGains.from_scenario(scenario)
    params = params or LinkBudgetParams()
    sizes = scenario.config.platoon_sizes
    num_k = scenario.config.num_subchannels
    out: list[Violation] = []

    def bad(code, detail):
        out.append(Violation(code, detail))

    for (m, j), k in alloc.unicast.items():
        if not (0 <= m < len(sizes) and 1 <= j <= sizes[m] - 2):
            bad("index", f"unicast transmitter {(m, j)} does not exist")
        if not 0 <= k < num_k:
            bad("index", f"unicast {(m, j)} on unknown subchannel {k}")
    for (m, g), k in alloc.groupcast.items():
        if not (0 <= m < len(sizes) and g in (PLV, PRV)):
            bad("index", f"groupcaster {(m, g)} does not exist")
        if not 0 <= k < num_k:
            bad("index", f"groupcast {(m, g)} on unknown subchannel {k}")
    for c, k in alloc.ie_share.items():
        if not 0 <= c < len(scenario.ies):
            bad("index", f"IE {c} does not exist")
        if not 0 <= k < num_k:
            bad("index", f"IE {c} on unknown subchannel {k}")
    if out:
        return out

    # (7d) adjacent PMVs never share
    for (m, j), k in sorted(alloc.unicast.items()):
        if alloc.unicast.get((m, j + 1)) == k:
            bad("(7d)", f"PMVs {j} and {j + 1} of platoon {m} both on subchannel {k}")

    per_k_ies: dict = {}
    for c, k in alloc.ie_share.items():
        per_k_ies.setdefault(k, []).append(c)
    for k, cs in sorted(per_k_ies.items()):
        if len(cs) > 1:
            bad("(7g)", f"subchannel {k} carries IEs {sorted(cs)}")

    per_k_gc: dict = {}
    for key, k in alloc.groupcast.items():
        per_k_gc.setdefault(k, []).append(key)
    uni_k = alloc.unicast_channels()
    for k, keys in sorted(per_k_gc.items()):
        if len(keys) > 1:
            bad("(7e)", f"subchannel {k} carries groupcasts {sorted(keys)}")
        if k in uni_k:
            bad("(7f)", f"subchannel {k} carries both groupcast and unicast")

    # (7c) power limits
    for key in alloc.unicast:
        p = alloc.unicast_power.get(key)
        if p is None or not 0 <= p <= params.p_max_unicast * (1 + QOS_RTOL):
            bad("(7c)", f"unicast power of {key} is {p}")
    for key in alloc.groupcast:
        p = alloc.groupcast_power.get(key)
        if p is None or not 0 <= p <= params.p_max_groupcast * (1 + QOS_RTOL):
            bad("(7c)", f"groupcast power of {key} is {p}")
    for c in alloc.ie_share:
        p = alloc.ie_power.get(c)
        if p is None or not 0 <= p <= params.p_max_ie * (1 + QOS_RTOL):
            bad("(7c)", f"IE power of {c} is {p}")
    if params.p_max_unicast > params.p_max_groupcast:
        bad("(7c)", "unicast power cap exceeds the groupcast cap")
    if any(v.code == "(7c)" for v in out):
        return out

    txs = alloc.transmitters(gains)

    # (7b) PRV inside the PLV's groupcast range
    for (m, g), k in sorted(alloc.groupcast.items()):
        if g != PRV:
            continue
        r = alloc.prv.get(m)
        if r is None or not 1 <= r <= sizes[m] - 1:
            bad("(7b)", f"platoon {m} groupcasts from PRV {r}")
            continue
        k0 = alloc.groupcast.get((m, PLV))
        if k0 is None:
            bad("(7b)", f"platoon {m} has a PRV but no PLV subchannel")
            continue
        if not meets(groupcast_sinr(m, PLV, r, k0, alloc, gains, params, txs), params.gamma_thr):
            bad("(7b)", f"PRV {r} of platoon {m} is outside the PLV's range")

    for c, k in sorted(alloc.ie_share.items()):
        if not meets(ie_sinr(c, k, alloc, gains, params, txs), params.delta_thr):
            bad("(7h)", f"IE {c} below delta_thr on subchannel {k}")

    for (m, j), k in sorted(alloc.unicast.items()):
        if alloc.unicast.get((m, j - 1)) == k or alloc.unicast.get((m, j + 1)) == k:
            continue  # already reported under (7d)
        if not meets(unicast_sinr(m, j + 1, k, alloc, gains, params, txs), params.gamma_thr):
            bad("(7i)", f"unicast {j}->{j + 1} of platoon {m} below gamma_thr on subchannel {k}")
    return out
