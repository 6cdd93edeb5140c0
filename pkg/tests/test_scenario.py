import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from platoonshare.errors import ConfigError
from platoonshare.scenario import IEKind, Role, ScenarioConfig, build_scenario, load_config, on_any_road


def test_default_table_config():
    sc = build_scenario(ScenarioConfig())
    assert len(sc.vehicles) == 15
    assert len(sc.ies) == 65
    assert sc.config.num_subchannels == 65


def test_minimal_platoon():
    sc = build_scenario(ScenarioConfig(num_platoons=1, platoon_sizes=(2,)))
    a, b = sc.platoon(0)
    assert a.role is Role.PLV and b.role is Role.PMV
    assert math.dist(a.position, b.position) == pytest.approx(15.0)


def test_same_seed_same_world():
    cfg = ScenarioConfig(rng_seed=7)
    assert build_scenario(cfg) == build_scenario(cfg)
    assert build_scenario(cfg).dump() == build_scenario(cfg).dump()


def test_different_seed_moves_ies():
    a = build_scenario(ScenarioConfig(rng_seed=1))
    b = build_scenario(ScenarioConfig(rng_seed=2))
    assert a.ies != b.ies


@pytest.mark.parametrize(
    "kw, word",
    [
        (dict(num_platoons=0, platoon_sizes=()), "num_platoons"),
        (dict(platoon_sizes=(3, 3)), "platoon_sizes"),
        (dict(platoon_sizes=(3, 3, 1, 3, 3)), "size"),
        (dict(intra_platoon_gap=0), "intra_platoon_gap"),
        (dict(lane_width=-1), "lane_width"),
        (dict(num_subchannels=0), "num_subchannels"),
        (dict(ie_vehicle_fraction=1.5), "ie_vehicle_fraction"),
        (dict(cell_radius=50, ie_radius=None), "cell_radius"),
    ],
)
def test_bad_config_names_invariant(kw, word):
    with pytest.raises(ConfigError, match=word):
        ScenarioConfig(**kw)


def test_equal_platoons():
    cfg = ScenarioConfig.equal_platoons(35)
    assert cfg.platoon_sizes == (7,) * 5
    with pytest.raises(ConfigError):
        ScenarioConfig.equal_platoons(33)


def test_dump_lines():
    sc = build_scenario(ScenarioConfig(num_ies=2))
    lines = sc.dump().splitlines()
    assert lines[0].startswith("BS - ")
    assert len(lines) == 1 + 15 + 2
    assert lines[1].split()[0] == "PLV"


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"scenario": {"num_ies": 3, "rng_seed": 4}}))
    cfg = load_config(p)
    assert cfg.num_ies == 3 and cfg.rng_seed == 4
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ConfigError, match="bogus"):
        load_config(p)
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(p)


@settings(max_examples=40, deadline=None)
@given(
    sizes=st.lists(st.integers(2, 11), min_size=1, max_size=6),
    seed=st.integers(0, 10_000),
    frac=st.floats(0, 1),
    radius=st.one_of(st.none(), st.floats(150, 1000)),
)
def test_world_invariants(sizes, seed, frac, radius):
    cfg = ScenarioConfig(
        num_platoons=len(sizes), platoon_sizes=tuple(sizes), num_ies=12, rng_seed=seed,
        ie_vehicle_fraction=frac, ie_radius=radius,
    )
    sc = build_scenario(cfg)
    assert len(sc.vehicles) == sum(sizes)
    assert len(sc.ies) == 12
    for ie in sc.ies:
        assert math.hypot(*ie.position) <= cfg.effective_ie_radius + 1e-9
        assert on_any_road(cfg, *ie.position) == (ie.kind is IEKind.VEHICLE)
    for m in range(len(sizes)):
        plat = sc.platoon(m)
        assert plat[0].role is Role.PLV and plat[0].index_in_platoon == 0
        for a, b in zip(plat, plat[1:]):
            assert math.dist(a.position, b.position) == pytest.approx(cfg.intra_platoon_gap)
        for v in plat:
            assert on_any_road(cfg, *v.position)
