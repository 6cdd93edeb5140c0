import numpy as np
import pytest

from platoonshare.channel import ChannelGains
from platoonshare.linkmodel import PLV, Allocation, LinkBudgetParams
from platoonshare.scenario import ScenarioConfig, build_scenario


def make_scenario(sizes=(3, 3, 3), num_ies=4, num_subchannels=8, seed=0, **kw):
    cfg = ScenarioConfig(
        num_platoons=len(sizes),
        platoon_sizes=tuple(sizes),
        num_ies=num_ies,
        num_subchannels=num_subchannels,
        rng_seed=seed,
        **kw,
    )
    return build_scenario(cfg)


def with_matrix(gains: ChannelGains, matrix) -> ChannelGains:
    return ChannelGains(np.array(matrix, dtype=float), gains.num_vehicles, gains.num_ies, gains._offsets)


def editable(gains: ChannelGains) -> np.ndarray:
    return np.array(gains.matrix, dtype=float)


def relay_fixture(params):
    """Sizes (7, 6, 6); platoon 0 fails at PMV 6, platoon 1 is covered, platoon 2 fails at PMV 5."""
    sc = make_scenario(sizes=(7, 6, 6), num_ies=2, num_subchannels=10)
    g = ChannelGains.from_scenario(sc)
    m = editable(g)
    p = 1.0
    fails = {0: 6, 2: 5}
    for pm in range(3):
        plv = g.vehicle_node(pm, 0)
        for j in range(1, sc.platoon_size(pm)):
            level = 0.5 if fails.get(pm) == j else 1.5
            m[plv, g.vehicle_node(pm, j)] = level * params.gamma_thr * params.sigma2 / p
    gg = with_matrix(g, m)
    a = Allocation()
    for pm in range(3):
        a.assign_groupcast(pm, PLV, pm, p)
    return sc, gg, a


@pytest.fixture
def params():
    return LinkBudgetParams()


@pytest.fixture
def small():
    sc = make_scenario()
    return sc, ChannelGains.from_scenario(sc)


@pytest.fixture
def default_scenario():
    sc = build_scenario(ScenarioConfig.equal_platoons(25, rng_seed=1))
    return sc, ChannelGains.from_scenario(sc)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        label, verdict, why = RESULTS[n]
        line = f"criterion {n} ({label}): {verdict}"
        terminalreporter.write_line(line + (f"  [{why}]" if why else ""))
