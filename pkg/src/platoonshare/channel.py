"""Average channel gains for every link class.

Gains are the statistical averages h̄ (linear power ratios).  Rayleigh fading
enters only through :func:`draw_fading`, which Monte-Carlo checks use; the
allocators always work on h̄.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .scenario import Scenario


class LinkClass(str, Enum):
    V2V = "V2V"
    IE_TO_BS = "IE-to-BS"
    IE_TO_VEHICLE = "IE-to-vehicle"
    VEHICLE_TO_BS = "vehicle-to-BS"


@dataclass(frozen=True)
class ChannelConfig:
    carrier_ghz: float = 2.0
    bs_height: float = 25.0
    vehicle_height: float = 1.5
    ie_height: float = 1.5
    bs_antenna_gain_db: float = 8.0
    vehicle_antenna_gain_db: float = 0.0
    # "formula": Table-2 pathloss models; "free-space": G * d**-alpha
    model: str = "formula"
    path_loss_exponent: float = 3.0


def _check_distance(d):
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("distance must be > 0")
    return d


def pathloss_cellular_db(d):
    """128.1 + 37.6 log10(d_km) with ``d`` in metres."""
    d = _check_distance(d)
    out = 128.1 + 37.6 * np.log10(d / 1000.0)
    return float(out) if out.ndim == 0 else out


def pathloss_v2v_db(d, carrier_ghz: float = 2.0):
    """WINNER II B1 LOS, first branch, with a 10 m floor on ``d``."""
    d = _check_distance(d)
    out = 22.7 * np.log10(np.maximum(d, 10.0)) + 41.0 + 20.0 * np.log10(carrier_ghz / 5.0)
    return float(out) if out.ndim == 0 else out


def pathloss_free_space_db(d, exponent: float = 3.0):
    d = _check_distance(d)
    out = 10.0 * exponent * np.log10(d)
    return float(out) if out.ndim == 0 else out


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_mw(dbm):
    out = db_to_linear(dbm)
    return float(out) if out.ndim == 0 else out


def mw_to_dbm(mw):
    out = linear_to_db(mw)
    return float(out) if out.ndim == 0 else out


def gain_from_pathloss(pathloss_db, antenna_gain_db=0.0):
    """h̄ = 10**((antenna gains - pathloss) / 10)."""
    out = db_to_linear(np.asarray(antenna_gain_db, dtype=float) - np.asarray(pathloss_db, dtype=float))
    return float(out) if out.ndim == 0 else out


def pathloss_db(d, link_class: LinkClass, cfg: ChannelConfig):
    if cfg.model == "free-space":
        return pathloss_free_space_db(d, cfg.path_loss_exponent)
    if cfg.model != "formula":
        raise ValueError(f"unknown pathloss model {cfg.model!r}")
    if link_class in (LinkClass.V2V, LinkClass.IE_TO_VEHICLE):
        return pathloss_v2v_db(d, cfg.carrier_ghz)
    return pathloss_cellular_db(d)


def antenna_gain_db(link_class: LinkClass, cfg: ChannelConfig) -> float:
    if link_class is LinkClass.IE_TO_BS:
        return cfg.bs_antenna_gain_db + cfg.vehicle_antenna_gain_db
    return cfg.vehicle_antenna_gain_db


def average_gain(d, link_class: LinkClass, cfg: ChannelConfig | None = None):
    """Average gain of a link of the given class over 3-D distance ``d`` metres."""
    cfg = cfg or ChannelConfig()
    return gain_from_pathloss(pathloss_db(d, link_class, cfg), antenna_gain_db(link_class, cfg))


def draw_fading(rng: np.random.Generator, size=None):
    """Rayleigh power fading factor beta ~ Exp(1)."""
    return rng.exponential(1.0, size)


class ChannelGains:
    """Dense table of average gains between all transmitters and receivers.

    Node layout: vehicles ``0..N-1`` in scenario order, IEs ``N..N+C-1``, then
    the BS.  Pairs the link model never uses hold NaN and raise ``LookupError``.
    """

    def __init__(self, matrix: np.ndarray, num_vehicles: int, num_ies: int, offsets=None):
        matrix = np.asarray(matrix, dtype=float)
        n = num_vehicles + num_ies + 1
        if matrix.shape != (n, n):
            raise ValueError(f"gain matrix must be {n}x{n}, got {matrix.shape}")
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self.num_vehicles = num_vehicles
        self.num_ies = num_ies
        self.bs = num_vehicles + num_ies
        self._offsets = tuple(offsets) if offsets is not None else None

    @classmethod
    def from_scenario(cls, scenario: Scenario, cfg: ChannelConfig | None = None) -> "ChannelGains":
        cfg = cfg or ChannelConfig()
        nv, nc = len(scenario.vehicles), len(scenario.ies)
        xy = np.array(
            [v.position for v in scenario.vehicles]
            + [ie.position for ie in scenario.ies]
            + [scenario.bs_position],
            dtype=float,
        ).reshape(-1, 2)
        z = np.array([cfg.vehicle_height] * nv + [cfg.ie_height] * nc + [cfg.bs_height])
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.sqrt((diff**2).sum(-1) + (z[:, None] - z[None, :]) ** 2)

        n = nv + nc + 1
        g = np.full((n, n), np.nan)
        veh = slice(0, nv)
        ie = slice(nv, nv + nc)
        bs = nv + nc

        def fill(rows, cols, link_class):
            d = dist[rows, cols]
            g[rows, cols] = average_gain(np.maximum(d, 1e-9), link_class, cfg)

        fill(veh, veh, LinkClass.V2V)
        fill(ie, veh, LinkClass.IE_TO_VEHICLE)
        fill(ie, slice(bs, bs + 1), LinkClass.IE_TO_BS)
        fill(veh, slice(bs, bs + 1), LinkClass.VEHICLE_TO_BS)
        np.fill_diagonal(g, np.nan)
        return cls(g, nv, nc, offsets=scenario._offsets)

    # node helpers
    def vehicle_node(self, m: int, j: int) -> int:
        if self._offsets is None:
            raise LookupError("gains were built without platoon layout")
        return self._offsets[m] + j

    def ie_node(self, c: int) -> int:
        if not 0 <= c < self.num_ies:
            raise LookupError(f"no IE {c}")
        return self.num_vehicles + c

    def gain(self, tx: int, rx: int) -> float:
        value = self.matrix[tx, rx]
        if np.isnan(value):
            raise LookupError(f"no gain defined from node {tx} to node {rx}")
        return float(value)

    def link_class(self, tx: int, rx: int) -> LinkClass:
        tx_vehicle = tx < self.num_vehicles
        tx_ie = self.num_vehicles <= tx < self.bs
        if rx == self.bs:
            if tx_ie:
                return LinkClass.IE_TO_BS
            if tx_vehicle:
                return LinkClass.VEHICLE_TO_BS
        elif rx < self.num_vehicles and tx != rx:
            if tx_vehicle:
                return LinkClass.V2V
            if tx_ie:
                return LinkClass.IE_TO_VEHICLE
        raise LookupError(f"no link class for {tx} -> {rx}")

    def dump(self) -> str:
        """Tab-separated gain table in dB (empty cell for undefined pairs)."""
        rows = []
        for tx in range(self.matrix.shape[0]):
            cells = ["" if np.isnan(v) else f"{10 * np.log10(v):.3f}" for v in self.matrix[tx]]
            rows.append("\t".join([str(tx)] + cells))
        header = "\t".join(["tx\\rx"] + [str(i) for i in range(self.matrix.shape[1])])
        return header + "\n" + "\n".join(rows) + "\n"
