import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from platoonshare.channel import (
    ChannelConfig,
    ChannelGains,
    LinkClass,
    average_gain,
    db_to_linear,
    draw_fading,
    gain_from_pathloss,
    linear_to_db,
    pathloss_cellular_db,
    pathloss_v2v_db,
)
from platoonshare.errors import DomainError


def test_cellular_pathloss_points():
    assert pathloss_cellular_db(1000) == pytest.approx(128.1)
    assert pathloss_cellular_db(100) == pytest.approx(90.5)
    assert pathloss_cellular_db(2000) == pytest.approx(128.1 + 37.6 * math.log10(2), abs=1e-9)
    assert pathloss_cellular_db(2000) == pytest.approx(139.42, abs=0.01)


def test_v2v_pathloss_points():
    assert pathloss_v2v_db(10, 5.0) == pytest.approx(63.7)
    assert pathloss_v2v_db(100, 5.0) == pytest.approx(86.4)
    assert pathloss_v2v_db(5, 2.0) == pathloss_v2v_db(10, 2.0)


@pytest.mark.parametrize("d", [0, -3])
def test_nonpositive_distance(d):
    with pytest.raises(DomainError):
        pathloss_cellular_db(d)
    with pytest.raises(DomainError):
        pathloss_v2v_db(d)


def test_gain_from_pathloss():
    assert gain_from_pathloss(90.5, 8) == pytest.approx(10 ** -8.25)
    assert gain_from_pathloss(0, 0) == 1.0


def test_doubling_distance_cellular_slope():
    g1 = average_gain(300, LinkClass.VEHICLE_TO_BS)
    g2 = average_gain(600, LinkClass.VEHICLE_TO_BS)
    assert g2 / g1 == pytest.approx(10 ** (-3.76 * math.log10(2)))


def test_bs_gain_only_on_ie_uplink():
    d = 250.0
    assert average_gain(d, LinkClass.IE_TO_BS) / average_gain(d, LinkClass.VEHICLE_TO_BS) == pytest.approx(10 ** 0.8)


def test_free_space_model():
    cfg = ChannelConfig(model="free-space", path_loss_exponent=3)
    assert average_gain(10, LinkClass.V2V, cfg) == pytest.approx(1e-3)


@given(st.floats(0.1, 5000), st.floats(0.1, 5000))
def test_pathloss_monotone(a, b):
    lo, hi = sorted((a, b))
    assert pathloss_cellular_db(lo) <= pathloss_cellular_db(hi)
    assert pathloss_v2v_db(lo) <= pathloss_v2v_db(hi)


@given(st.floats(-200, 60))
def test_db_round_trip(x):
    assert float(linear_to_db(db_to_linear(x))) == pytest.approx(x, rel=1e-12, abs=1e-12)


def test_fading_distribution():
    rng = np.random.default_rng(5)
    beta = draw_fading(rng, 1_000_000)
    assert beta.mean() == pytest.approx(1.0, abs=0.01)
    assert np.mean(beta >= 1) == pytest.approx(math.exp(-1), abs=0.005)
    assert np.all(beta >= 0)
    ks = stats.kstest(draw_fading(np.random.default_rng(6), 100_000), "expon")
    assert ks.pvalue > 0.01


def test_gain_table(small):
    sc, g = small
    n = len(sc.vehicles)
    assert g.matrix.shape == (n + len(sc.ies) + 1,) * 2
    a, b = g.vehicle_node(0, 0), g.vehicle_node(0, 1)
    assert g.link_class(a, b) is LinkClass.V2V
    assert g.link_class(g.ie_node(0), a) is LinkClass.IE_TO_VEHICLE
    assert g.link_class(g.ie_node(0), g.bs) is LinkClass.IE_TO_BS
    assert g.link_class(a, g.bs) is LinkClass.VEHICLE_TO_BS
    assert g.gain(a, b) == pytest.approx(g.gain(b, a))
    with pytest.raises(LookupError):
        g.gain(a, a)
    with pytest.raises(LookupError):
        g.gain(g.bs, a)
    with pytest.raises(LookupError):
        g.gain(a, g.ie_node(0))  # vehicles never transmit to IEs
    defined = g.matrix[~np.isnan(g.matrix)]
    assert np.all(np.isfinite(defined)) and np.all(defined > 0)
    text = g.dump()
    assert text.count("\n") == g.matrix.shape[0] + 1
