import math
from dataclasses import replace

import numpy as np
import pytest

from occupycow import ChannelParams, PhasePlan, ScenarioConfig, TopologySpec
from occupycow.analytic_generic import generic_failure
from occupycow.analytic_star import downlink_failure, star_cycle_failure, uplink_failure
from occupycow.simulator import (BLOCK, block_rng, draw_fades, estimate_components,
                                 estimate_failure, simulate_baseline, simulate_cycle,
                                 wilson_halfwidth)

W = 2e7


def star(n, protocol, snr_db, plan=None, **kw):
    hops = {"one_hop": 1, "fixed_2hop": 2, "adaptive_2hop": 2}.get(protocol, 3)
    return ScenarioConfig(TopologySpec(n), ChannelParams.from_db(snr_db, W), 160, 2e-3,
                          protocol, plan or PhasePlan.even(hops), **kw)


def generic(N, s, d, protocol, snr_db, **kw):
    return ScenarioConfig(TopologySpec(N, "generic", n_streams=s, avg_subscribers=d),
                          ChannelParams.from_db(snr_db, W), 160, 2e-3, protocol,
                          PhasePlan.even(2), **kw)


def test_fades_symmetric_exponential():
    G = draw_fades(block_rng(1, 0), 20000, 4)
    assert np.all(G == np.transpose(G, (0, 2, 1)))
    assert np.all(G[:, range(4), range(4)] == 0)
    assert G[:, 0, 1].mean() == pytest.approx(1.0, abs=0.03)


def test_all_links_strong_or_dead():
    cfg = star(5, "adaptive_3hop", 5.0, PhasePlan.even(3, 0.1))
    out = simulate_cycle(cfg, np.full((6, 6), 1e9))
    assert np.all(out.downlink_hop == 1) and np.all(out.uplink_hop == 1)
    out = simulate_cycle(cfg, np.full((6, 6), 1e-12))
    assert np.all(out.downlink_hop == 0) and np.all(out.uplink_hop == 0)
    assert out.cycle_failed.all()


def test_worked_example_ten_nodes():
    # C = 0, S_i = i + 1.  S0-S2 hear C directly; S3/S4 hang off S0, S5 off
    # S1, S6/S7 off S2 and S8 is two relays away (C -> S1 -> S5 -> S8).
    # S9 has no usable link at all.
    big = 1e9
    G = np.zeros((11, 11))
    links = [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5), (2, 6), (3, 7), (3, 8), (6, 9)]
    for u, v in links:
        G[u, v] = G[v, u] = big
    cfg = star(10, "adaptive_3hop", 5.0, PhasePlan.even(3, 0.1), ideal_scheduling=True)
    trace = []
    out = simulate_cycle(cfg, G, trace=trace)
    d, u = out.downlink_hop[0], out.uplink_hop[0]
    assert list(d[:9] > 0) == [True] * 9 and d[9] == 0
    assert list(u[:9] > 0) == [True] * 9 and u[9] == 0
    assert list(d[:3]) == [1, 1, 1] and d[8] == 3
    assert list(u[:3]) == [1, 1, 1] and u[8] == 3
    assert len(trace) == 7
    # fades are reciprocal, so a node nobody hears also misses every ACK
    # and, in turn, nobody collects its ACK: no one holds the full schedule
    real = replace(cfg, ideal_scheduling=False)
    out = simulate_cycle(real, G)
    assert not out.scheduling_disseminated.any()
    assert out.downlink_hop[0, :3].all() and not out.downlink_hop[0, 3:].any()


def test_high_snr_no_failures():
    est = estimate_failure(star(4, "adaptive_3hop", 200.0, PhasePlan.even(3, 0.1)), 5000, seed=1)
    assert est.failures == 0
    assert est.ci_halfwidth < 1e-3


def test_determinism_over_workers():
    cfg = star(4, "fixed_3hop", 0.0)
    trials = 2 * BLOCK + 123
    a = estimate_components(cfg, trials, seed=9, workers=1)
    b = estimate_components(cfg, trials, seed=9, workers=3)
    assert a == b
    assert estimate_components(cfg, trials, seed=10) != a


def _snr_for_p(p, rate):
    x = -math.log1p(-p)
    return math.expm1(rate * math.log(2) / W) / x


def test_two_hop_half():
    # n = 2, equal quarter-cycle phases: every link fails w.p. 0.5 -> 0.5
    n = 2
    R = 160 * n / (2e-3 / 4)
    cfg = replace(star(n, "fixed_2hop", 0.0), channel=ChannelParams(_snr_for_p(0.5, R), W))
    assert downlink_failure(cfg) == pytest.approx(0.5, abs=1e-12)
    est = estimate_failure(cfg, 400000, seed=3, component="downlink")
    assert abs(est.p - 0.5) <= 3 * est.ci_halfwidth / 1.96


@pytest.mark.parametrize("proto", ["one_hop", "fixed_2hop", "adaptive_2hop", "fixed_3hop", "adaptive_3hop"])
def test_star_mc_matches_engines(proto):
    cfg = star(3, proto, {"one_hop": 14.0}.get(proto, 3.0), ideal_scheduling=proto.startswith("adaptive"))
    est = estimate_components(cfg, 300000, seed=5)
    for side, fn in (("downlink", downlink_failure), ("uplink", uplink_failure)):
        p = fn(cfg)
        e = est[side]
        se = max(e.ci_halfwidth / 1.96, 1e-12)
        assert abs(e.p - p) <= 3.5 * se, (side, e.p, p)


def test_adaptive_cycle_within_bound():
    cfg = star(3, "adaptive_3hop", 2.0, PhasePlan.even(3, 0.1))
    bound = star_cycle_failure(cfg).p_cycle_bound
    est = estimate_failure(cfg, 200000, seed=2)
    assert est.p <= bound + 3 * est.ci_halfwidth / 1.96


def test_freq_hop_k1_is_one_shot():
    a = simulate_baseline(generic(6, 6, 2, "freq_hop", 15.0, subchannels=1), 4000, seed=4)
    b = simulate_baseline(generic(6, 6, 2, "one_hop", 15.0), 4000, seed=4)
    assert np.array_equal(a.cycle_failed, b.cycle_failed)
    assert a.cycle_failed.any()


def test_duty_full_is_two_hop():
    a = simulate_baseline(generic(6, 6, 2, "duty_cycled", 5.0, duty_pct=100.0), 4000, seed=4)
    b = simulate_baseline(generic(6, 6, 2, "fixed_2hop", 5.0), 4000, seed=4)
    assert np.array_equal(a.cycle_failed, b.cycle_failed)


def test_nonsim_worse_than_simultaneous():
    N = 8
    a = estimate_failure(generic(N, N, 1, "nonsim_relay", 8.0, relays=N - 2, hops=2), 100000, seed=6)
    b = estimate_failure(generic(N, N, 1, "fixed_2hop", 8.0), 100000, seed=6)
    assert a.p >= b.p


def test_freq_hop_mc():
    cfg = generic(4, 4, 1, "freq_hop", 14.0, subchannels=3)
    p = generic_failure(cfg)
    est = estimate_failure(cfg, 200000, seed=8)
    assert abs(est.p - p) <= 3 * est.ci_halfwidth / 1.96


def test_wilson():
    assert wilson_halfwidth(0, 100) > 0
    assert wilson_halfwidth(50, 100) == pytest.approx(0.0961685, abs=1e-6)


def test_single_cycle_rejects_freq_hop():
    with pytest.raises(ValueError):
        simulate_cycle(generic(4, 4, 1, "freq_hop", 10.0, subchannels=2), np.ones((4, 4)))
