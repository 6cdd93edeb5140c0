"""Acceptance checks, one test per criterion.

Each test records PASS/FAIL in RESULTS; conftest prints them at the end of
the session, one line per criterion.
"""

import functools
import statistics
import time
import zlib

import numpy as np
import pytest

from platoonshare.baselines import centralized_relay
from platoonshare.channel import ChannelGains, draw_fading
from platoonshare.harness import ExperimentPlan, aggregate_csv, raw_csv, run_sweep
from platoonshare.linkmodel import PLV, STRUCTURAL_CODES, LinkBudgetParams, groupcast_sinr
from platoonshare.reliability import ReliabilityParams, success_probability
from platoonshare.rspu import resulted_clustering, sort_ascending
from platoonshare.scenario import ScenarioConfig, build_scenario
from platoonshare.tmpg import MatchTriple, resulted_matching, run_tmpg, select_prvs, sort_candidates

from conftest import editable, make_scenario, relay_fixture, with_matrix

RESULTS: dict = {}
PARAMS = LinkBudgetParams()


def criterion(n, label):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            try:
                fn(*a, **kw)
            except BaseException as exc:
                RESULTS[n] = (label, "FAIL", f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
                raise
            RESULTS[n] = (label, "PASS", "")
        return run
    return wrap


@pytest.fixture(scope="module")
def sweep():
    """The default sweep (5 methods x 9 sizes x 20 seeds), run once and timed."""
    t0 = time.perf_counter()
    res = run_sweep(ExperimentPlan())
    return res, time.perf_counter() - t0


def _means(res, method, field):
    out = {}
    for pv in ExperimentPlan().sweep:
        rows = [r for r in res.select(method, pv) if r.report is not None]
        out[pv] = float(np.mean([getattr(r.report, field) for r in rows])) if rows else float("nan")
    return out


# 1 -------------------------------------------------------------------------


def _T(c, k, owner, x, virtual=False):
    return MatchTriple(c, k, owner, x, virtual)


@criterion(1, "worked-example goldens")
def test_c1_worked_examples():
    t0 = time.perf_counter()
    plv_list = [
        _T(5, 2, (2, PLV), 50.2), _T(4, 2, (1, PLV), 49.8), _T(4, 4, (2, PLV), 49.8), _T(3, 1, (1, PLV), 48.7),
        _T(2, 6, (1, PLV), 48.4), _T(1, 3, (2, PLV), 45.2), _T(5, 5, (3, PLV), 40.9),
        _T(7, 5, (3, PLV), 38.5), _T(6, 7, (3, PLV), 30.2),
    ]
    assert sort_candidates(plv_list) == plv_list
    got = resulted_matching(plv_list, range(1, 8), range(1, 8), [(m, PLV) for m in (1, 2, 3)])
    assert {t.key() for t in got} == {(5, 2, (2, PLV)), (3, 1, (1, PLV)), (7, 5, (3, PLV))}

    sc, g, a = relay_fixture(PARAMS)
    assert select_prvs(sc, g, a, PARAMS) == [5, None, 4]

    # unicast example: two real IEs, virtual IEs 3 and 4, clusters Q1..Q3
    cluster_list = sort_ascending([
        _T(1, 3, 2, 1.2), _T(1, 1, 1, 1.5), _T(2, 3, 1, 1.9), _T(2, 1, 1, 2.1),
        _T(2, 2, 3, 2.4), _T(3, 2, 3, 3.0, True), _T(4, 4, 1, 3.0, True), _T(3, 4, 2, 3.3, True),
    ])
    got = resulted_clustering(cluster_list, {1, 2, 3, 4}, {1, 2, 3, 4}, {1, 2, 3})
    assert {t.key() for t in got} == {(1, 3, 2), (2, 1, 1), (3, 2, 3)}
    assert time.perf_counter() - t0 < 1.0


# 2 -------------------------------------------------------------------------


@criterion(2, "structural subchannel counts")
@pytest.mark.slow
def test_c2_subchannel_counts(sweep):
    res, _ = sweep
    M = ExperimentPlan().scenario_template.num_platoons
    for r in res.rows:
        assert r.status == "ok", (r.method, r.pv_count, r.seed, r.status)
        if r.method.startswith("norelay"):
            assert r.report.groupcast_subchannels == M
        if r.method.startswith("cen"):
            assert r.report.groupcast_subchannels == 2 * M
    # TMPG: M plus one per relayed platoon, checked on the allocation itself
    plan = ExperimentPlan()
    counts = {}
    for pv in plan.sweep:
        for seed in plan.seeds:
            scn = build_scenario(plan.scenario_config(pv, seed))
            t = run_tmpg(scn, ChannelGains.from_scenario(scn), plan.params)
            n = len(t.allocation.groupcast_channels())
            relayed = sum(r is not None for r in t.relays)
            assert n == M + relayed
            if relayed == 0:
                assert n == M
            counts.setdefault(pv, []).append(n)
    lo, hi = min(plan.sweep), max(plan.sweep)
    assert M in counts[lo], "smallest platoons never run on M subchannels"
    assert 2 * M in counts[hi], "largest platoons never need a relay in every platoon"
    means = [np.mean(counts[pv]) for pv in plan.sweep]
    assert all(b >= a for a, b in zip(means, means[1:])), means
    print("TMPG groupcast subchannels (mean by PV):", " ".join(f"{m:.2f}" for m in means))


# 3 -------------------------------------------------------------------------


@criterion(3, "QoS satisfaction")
@pytest.mark.slow
def test_c3_qos(sweep):
    res, elapsed = sweep
    proposed = [r for r in res.rows if r.method == "proposed"]
    assert proposed and all(r.report is not None and r.report.qos_satisfaction_rate == 1.0 for r in proposed)
    M = ExperimentPlan().scenario_template.num_platoons
    below = [
        pv for pv, q in _means(res, "norelay-raa", "qos_satisfaction_rate").items()
        if pv // M >= 7 and q < 1.0
    ] + [
        pv for pv, q in _means(res, "norelay-hraim", "qos_satisfaction_rate").items()
        if pv // M >= 7 and q < 1.0
    ]
    assert below, "No Relay kept every IE satisfied at every size with >= 7 vehicles"
    assert elapsed < 300


# 4 -------------------------------------------------------------------------


@criterion(4, "closed-form success probability vs Monte Carlo")
def test_c4_monte_carlo():
    rng = np.random.default_rng(2024)
    rel = ReliabilityParams.from_link_budget(PARAMS)
    for _ in range(10):
        h = 10 ** rng.uniform(-10, -7)
        interference = 10 ** rng.uniform(-13, -10)
        # put the mean SINR where the success probability is not trivially 0 or 1
        target = rng.uniform(0.5, 20) * rel.gamma_thr
        p = target * (rel.sigma2 + interference) / h
        beta = draw_fading(rng, 1_000_000)
        empirical = np.mean(p * beta * h / (rel.sigma2 + interference) >= rel.gamma_thr)
        assert abs(empirical - success_probability(p, h, interference, rel)) <= 0.005


# 5 -------------------------------------------------------------------------


def _naive_greedy(cands, free_c, free_k, free_o, ascending):
    """Repeatedly take the best candidate whose three parties are still free."""
    free_c, free_k, free_o = set(free_c), set(free_k), set(free_o)
    pool = list(cands)
    picked = []
    while True:
        live = [t for t in pool if t.ie in free_c and t.subchannel in free_k and t.owner in free_o]
        if not live:
            return picked
        sign = 1 if ascending else -1
        best = min(live, key=lambda t: (sign * t.score, t.ie, t.subchannel, str(t.owner)))
        picked.append(best)
        free_c.discard(best.ie)
        free_k.discard(best.subchannel)
        free_o.discard(best.owner)


def _bisect(g, m, size, lo_j, hi_j, tx_index):
    from platoonshare.linkmodel import PRV, Allocation

    role = PLV if tx_index == 0 else PRV
    a = Allocation()
    if role == PRV:
        a.prv[m] = tx_index
    lo, hi = 0.0, 1e6
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        a.assign_groupcast(m, role, 0, mid)
        ok = all(groupcast_sinr(m, role, j, 0, a, g, PARAMS) >= PARAMS.gamma_thr for j in range(lo_j, hi_j))
        lo, hi = (lo, mid) if ok else (mid, hi)
    return hi


@criterion(5, "oracle equivalence")
def test_c5_oracles():
    rng = np.random.default_rng(7)
    for trial in range(200):
        nc, nk, no = (int(v) for v in rng.integers(1, [7, 7, 5]))
        cands = []
        for c in range(nc):
            for k in range(nk):
                for o in range(no):
                    if rng.random() < 0.6:
                        # coarse scores so ties happen
                        cands.append(MatchTriple(c, k, o, float(rng.integers(0, 8))))
        tm = sorted(cands, key=lambda t: (-t.score, t.ie, t.subchannel, t.owner))
        got = resulted_matching(tm, range(nc), range(nk), range(no))
        assert [t.key() for t in got] == [t.key() for t in _naive_greedy(cands, range(nc), range(nk), range(no), False)]
        got = resulted_clustering(sort_ascending(cands), range(nc), range(nk), range(no))
        assert [t.key() for t in got] == [t.key() for t in _naive_greedy(cands, range(nc), range(nk), range(no), True)]

    for size in range(3, 7):
        for seed in range(10):
            sc = make_scenario(sizes=(size,), num_ies=0, num_subchannels=4, seed=seed)
            g = ChannelGains.from_scenario(sc)
            mat = editable(g)
            r_ = np.random.default_rng(1000 * size + seed)
            nodes = [g.vehicle_node(0, j) for j in range(size)]
            for i, a in enumerate(nodes):
                for b in nodes[i + 1:]:
                    mat[a, b] = mat[b, a] = r_.uniform(1e-9, 1e-7)
            gg = with_matrix(g, mat)
            scores = {r: max(_bisect(gg, 0, size, 1, r + 1, 0), _bisect(gg, 0, size, r + 1, size, r))
                      for r in range(1, max(1, size - 2) + 1)}
            best = min(scores.values())
            want = max(r for r, s in scores.items() if s <= best * (1 + 1e-6))
            assert centralized_relay(0, gg, PARAMS, size)[0] == want


# 6 -------------------------------------------------------------------------


@criterion(6, "invariant suite")
@pytest.mark.slow
def test_c6_invariants(sweep):
    res, _ = sweep
    failed = [(r.method, r.pv_count, r.seed, r.status) for r in res.rows if r.report is None]
    assert not failed, failed[:5]
    bad = [(r.method, r.pv_count, r.seed) for r in res.rows if r.structural_violations]
    assert not bad, bad[:5]
    qos = [(r.pv_count, r.seed) for r in res.rows if r.method == "proposed" and r.qos_violations]
    assert not qos, qos[:5]
    assert "(7h)" not in STRUCTURAL_CODES and "(7c)" in STRUCTURAL_CODES


# 7 -------------------------------------------------------------------------


@criterion(7, "RSPU subchannel trend")
@pytest.mark.slow
def test_c7_efficiency_trend(sweep):
    res, _ = sweep
    prop = _means(res, "proposed", "total_subchannels")
    cen = _means(res, "cen-raa", "total_subchannels")
    nor = _means(res, "norelay-raa", "total_subchannels")
    for pv in prop:
        if pv > 35:
            continue
        print(f"pv={pv}: proposed {prop[pv]:.2f}  cen-raa {cen[pv]:.2f}  norelay-raa {nor[pv]:.2f}")
        assert prop[pv] <= cen[pv] and prop[pv] <= nor[pv], pv


# 8 -------------------------------------------------------------------------


@criterion(8, "determinism")
@pytest.mark.slow
def test_c8_determinism(sweep):
    first, _ = sweep
    second = run_sweep(ExperimentPlan())
    assert aggregate_csv(first).encode() == aggregate_csv(second).encode()
    assert raw_csv(first).encode() == raw_csv(second).encode()
    assert zlib.crc32(raw_csv(first).encode()) == zlib.crc32(raw_csv(second).encode())


# 9 -------------------------------------------------------------------------


def _time_tmpg(num_ies, reps=20):
    cfg = ScenarioConfig(num_ies=num_ies, platoon_sizes=(7,) * 5)
    scn = build_scenario(cfg)
    g = ChannelGains.from_scenario(scn)
    run_tmpg(scn, g, PARAMS)
    t0 = time.perf_counter()
    for _ in range(reps):
        run_tmpg(scn, g, PARAMS)
    return (time.perf_counter() - t0) / reps


@criterion(9, "TMPG runtime scaling")
def test_c9_scaling():
    ratios = []
    for _ in range(5):
        ratios.append(_time_tmpg(130) / _time_tmpg(65))
    med = statistics.median(ratios)
    print(f"TMPG time ratio for doubled IE count: median {med:.2f} ({', '.join(f'{r:.2f}' for r in ratios)})")
    assert med <= 2.5
