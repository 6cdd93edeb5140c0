"""Urban single-cell world: one BS, four roads around it, platoons and IEs.

Coordinates are metres in the ground plane with the BS at the origin.  Road
``r`` runs parallel to one side of the street block::

    road 0: y = +d     road 1: x = +d     road 2: y = -d     road 3: x = -d

where ``d`` is the lane centre offset ``bs_to_road_distance + (lane + 0.5) *
lane_width``.  Positions along a road are given by an axis coordinate ``s``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError

NUM_ROADS = 4


class Role(str, Enum):
    PLV = "PLV"
    PMV = "PMV"


class IEKind(str, Enum):
    VEHICLE = "non-platooning-vehicle"
    USER = "cellular-user"


@dataclass(frozen=True)
class ScenarioConfig:
    num_platoons: int = 5
    platoon_sizes: tuple[int, ...] = (3, 3, 3, 3, 3)
    num_ies: int = 65
    num_subchannels: int = 65
    intra_platoon_gap: float = 15.0
    bs_to_road_distance: float = 100.0
    lane_width: float = 4.0
    num_lanes: int = 2
    cell_radius: float = 1000.0
    rng_seed: int = 0
    # share of IEs that are on-road vehicles; the rest are off-road users
    ie_vehicle_fraction: float = 0.5
    # IEs are dropped inside this radius around the BS (None: the full cell)
    ie_radius: float | None = 500.0
    ie_tx_power_dbm: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "platoon_sizes", tuple(int(v) for v in self.platoon_sizes))
        self.validate()

    def validate(self):
        if self.num_platoons < 1:
            raise ConfigError("num_platoons must be >= 1")
        if len(self.platoon_sizes) != self.num_platoons:
            raise ConfigError(
                f"platoon_sizes has {len(self.platoon_sizes)} entries, "
                f"num_platoons is {self.num_platoons}"
            )
        if any(v < 2 for v in self.platoon_sizes):
            raise ConfigError("every platoon size must be >= 2 (a PLV and at least one PMV)")
        if self.num_ies < 0:
            raise ConfigError("num_ies must be >= 0")
        if self.num_subchannels < 1:
            raise ConfigError("num_subchannels must be >= 1")
        if self.num_lanes < 1:
            raise ConfigError("num_lanes must be >= 1")
        for name in ("intra_platoon_gap", "bs_to_road_distance", "lane_width", "cell_radius"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive")
        if not 0.0 <= self.ie_vehicle_fraction <= 1.0:
            raise ConfigError("ie_vehicle_fraction must lie in [0, 1]")
        outer = self.bs_to_road_distance + self.num_lanes * self.lane_width
        if outer >= self.cell_radius:
            raise ConfigError("roads must lie inside cell_radius")
        if self.ie_radius is not None and not 0 < self.ie_radius <= self.cell_radius:
            raise ConfigError("ie_radius must lie in (0, cell_radius]")
        if self.ie_radius is not None and self.ie_radius <= outer:
            raise ConfigError("ie_radius must reach beyond the roads")
        half = self.road_half_length(self.num_lanes - 1)
        for size in self.platoon_sizes:
            if (size - 1) * self.intra_platoon_gap > 2 * half:
                raise ConfigError(f"a platoon of {size} vehicles does not fit on a road")

    @property
    def total_vehicles(self) -> int:
        return sum(self.platoon_sizes)

    @property
    def effective_ie_radius(self) -> float:
        return self.cell_radius if self.ie_radius is None else self.ie_radius

    def lane_offset(self, lane: int) -> float:
        return self.bs_to_road_distance + (lane + 0.5) * self.lane_width

    def road_half_length(self, lane: int, radius: float | None = None) -> float:
        r = self.cell_radius if radius is None else radius
        return math.sqrt(r * r - self.lane_offset(lane) ** 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["platoon_sizes"] = list(self.platoon_sizes)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def equal_platoons(cls, pv_count: int, num_platoons: int = 5, **kw) -> "ScenarioConfig":
        if pv_count % num_platoons:
            raise ConfigError(f"{pv_count} vehicles do not split into {num_platoons} equal platoons")
        size = pv_count // num_platoons
        return cls(num_platoons=num_platoons, platoon_sizes=(size,) * num_platoons, **kw)


@dataclass(frozen=True)
class Vehicle:
    platoon_id: int
    index_in_platoon: int
    role: Role
    position: tuple[float, float]
    road: int
    lane: int


@dataclass(frozen=True)
class IndividualEntity:
    id: int
    kind: IEKind
    position: tuple[float, float]
    tx_power_dbm: float


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    bs_position: tuple[float, float]
    vehicles: tuple[Vehicle, ...]
    ies: tuple[IndividualEntity, ...]
    _offsets: tuple[int, ...] = field(repr=False, compare=False, default=())

    @property
    def num_platoons(self) -> int:
        return self.config.num_platoons

    def platoon_size(self, m: int) -> int:
        return self.config.platoon_sizes[m]

    def vehicle_index(self, m: int, j: int) -> int:
        """Flat index of PV ``j`` of platoon ``m`` in :attr:`vehicles`."""
        if not 0 <= j < self.config.platoon_sizes[m]:
            raise IndexError(f"platoon {m} has no vehicle {j}")
        return self._offsets[m] + j

    def vehicle(self, m: int, j: int) -> Vehicle:
        return self.vehicles[self.vehicle_index(m, j)]

    def platoon(self, m: int) -> tuple[Vehicle, ...]:
        start = self._offsets[m]
        return self.vehicles[start : start + self.config.platoon_sizes[m]]

    def unicast_pmvs(self) -> list[tuple[int, int]]:
        """PMVs that unicast to their follower: indices 1..V_m-2 of every platoon."""
        return [(m, j) for m, size in enumerate(self.config.platoon_sizes) for j in range(1, size - 1)]

    def dump(self) -> str:
        lines = [f"BS - {self.bs_position[0]:.3f} {self.bs_position[1]:.3f}"]
        for v in self.vehicles:
            lines.append(
                f"{v.role.value} {v.platoon_id}:{v.index_in_platoon} "
                f"{v.position[0]:.3f} {v.position[1]:.3f}"
            )
        for ie in self.ies:
            kind = "IE-V" if ie.kind is IEKind.VEHICLE else "IE-U"
            lines.append(f"{kind} {ie.id} {ie.position[0]:.3f} {ie.position[1]:.3f}")
        return "\n".join(lines) + "\n"


def road_point(config: ScenarioConfig, road: int, lane: int, s: float) -> tuple[float, float]:
    d = config.lane_offset(lane)
    if road == 0:
        return (s, d)
    if road == 1:
        return (d, -s)
    if road == 2:
        return (-s, -d)
    return (-d, s)


def on_any_road(config: ScenarioConfig, x: float, y: float) -> bool:
    lo = config.bs_to_road_distance
    hi = lo + config.num_lanes * config.lane_width
    return lo <= abs(x) <= hi or lo <= abs(y) <= hi


def _place_platoons(config: ScenarioConfig) -> list[Vehicle]:
    vehicles = []
    for m, size in enumerate(config.platoon_sizes):
        road = m % NUM_ROADS
        lane = (m // NUM_ROADS) % config.num_lanes
        # platoons are centred on the point of their road closest to the BS
        head = (size - 1) * config.intra_platoon_gap / 2
        for j in range(size):
            s = head - j * config.intra_platoon_gap
            vehicles.append(
                Vehicle(
                    platoon_id=m,
                    index_in_platoon=j,
                    role=Role.PLV if j == 0 else Role.PMV,
                    position=road_point(config, road, lane, s),
                    road=road,
                    lane=lane,
                )
            )
    return vehicles


def _place_ies(config: ScenarioConfig, rng: np.random.Generator) -> list[IndividualEntity]:
    n_vehicles = int(round(config.num_ies * config.ie_vehicle_fraction))
    radius = config.effective_ie_radius
    kinds = [IEKind.VEHICLE] * n_vehicles + [IEKind.USER] * (config.num_ies - n_vehicles)
    ies = []
    for c, kind in enumerate(kinds):
        if kind is IEKind.VEHICLE:
            road = int(rng.integers(NUM_ROADS))
            lane = int(rng.integers(config.num_lanes))
            half = config.road_half_length(lane, radius)
            pos = road_point(config, road, lane, float(rng.uniform(-half, half)))
        else:
            while True:
                r = radius * math.sqrt(float(rng.random()))
                phi = 2 * math.pi * float(rng.random())
                x, y = r * math.cos(phi), r * math.sin(phi)
                if not on_any_road(config, x, y):
                    break
            pos = (x, y)
        ies.append(IndividualEntity(id=c, kind=kind, position=pos, tx_power_dbm=config.ie_tx_power_dbm))
    return ies


def build_scenario(config: ScenarioConfig) -> Scenario:
    config.validate()
    rng = np.random.default_rng(config.rng_seed)
    vehicles = _place_platoons(config)
    ies = _place_ies(config, rng)
    offsets, acc = [], 0
    for size in config.platoon_sizes:
        offsets.append(acc)
        acc += size
    return Scenario(
        config=config,
        bs_position=(0.0, 0.0),
        vehicles=tuple(vehicles),
        ies=tuple(ies),
        _offsets=tuple(offsets),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a scenario config from a JSON object of ScenarioConfig fields."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if "scenario" in data and isinstance(data["scenario"], dict):
        data = data["scenario"]
    return ScenarioConfig.from_dict(data)
