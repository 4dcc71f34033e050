import math
from dataclasses import replace

import pytest

from occupycow import ChannelParams, PhasePlan, ScenarioConfig, TopologySpec
from occupycow.optimizer import (AllocationGrid, InfeasibleBracket, NonMonotoneScan,
                                 SnrSearchSpec, _even_key, aggregate_rate, choose_hops,
                                 dest_sweep, failure_at, min_snr, min_snr_db_fn,
                                 optimize_cycle_allocation, optimize_phase_allocation,
                                 optimize_relay_count, optimize_subchannels, scheme_config)

WIDE = SnrSearchSpec(bracket_db=(-20.0, 140.0))


def template(n=30, m=160):
    return ScenarioConfig(TopologySpec(n), ChannelParams.from_db(0.0, 2e7), m, 2e-3,
                          "fixed_2hop", PhasePlan.even(2), ideal_scheduling=True)


# ----------------------------------------------------------------- search core

def test_lattice_geometry():
    spec = SnrSearchSpec()
    assert spec.levels == 11
    assert spec.delta_db == pytest.approx(80 / 2048)
    assert spec.delta_db <= spec.tolerance_db
    assert spec.snr_db(spec.top) == 60.0


def test_synthetic_search():
    # P(s) = 10^(-s/10) hits 1e-3 at exactly 30 dB
    f = lambda s: 10 ** (-s / 10)  # noqa: E731
    spec = SnrSearchSpec(1e-3)
    s = min_snr_db_fn(f, spec)
    assert 30.0 <= s < 30.0 + spec.delta_db
    assert f(s) <= 1e-3 < f(s - spec.tolerance_db)


def test_infeasible_bracket():
    with pytest.raises(InfeasibleBracket):
        min_snr_db_fn(lambda s: 0.5, SnrSearchSpec(1e-3))
    with pytest.raises(InfeasibleBracket):
        min_snr_db_fn(lambda s: 1e-12, SnrSearchSpec(1e-3))


def test_nonmonotone_scan():
    f = lambda s: 1e-2 if s < 10 else (0.5 if s < 20 else 1e-6)  # noqa: E731
    with pytest.raises(NonMonotoneScan):
        min_snr_db_fn(f, SnrSearchSpec(1e-3))


def test_bad_spec():
    with pytest.raises(ValueError):
        SnrSearchSpec(bracket_db=(5, 5))
    with pytest.raises(ValueError):
        SnrSearchSpec(target_failure=0.0)


@pytest.mark.parametrize("scheme", ["one_hop", "fixed_2hop", "fixed_3hop", "adaptive_2hop",
                                    "adaptive_3hop_even"])
def test_postcondition_engine(scheme):
    cfg = scheme_config(template(12), scheme)
    s = min_snr(cfg, WIDE)
    assert failure_at(cfg.with_snr_db(s)) <= 1e-9
    assert failure_at(cfg.with_snr_db(s - WIDE.delta_db)) > 1e-9
    assert failure_at(cfg.with_snr_db(s - WIDE.tolerance_db)) > 1e-9


def test_target_monotone():
    cfg = scheme_config(template(), "fixed_2hop")
    a = min_snr(cfg, SnrSearchSpec(1e-9))
    b = min_snr(cfg, SnrSearchSpec(2e-9))
    assert b <= a


def test_scheme_ordering_small():
    t = template(10)
    one = min_snr(scheme_config(t, "one_hop"), WIDE)
    harq = min_snr(scheme_config(t, "harq"), WIDE, engine="harq")
    two = min_snr(scheme_config(t, "fixed_2hop"), WIDE)
    assert one > harq > two


# ----------------------------------------------------------------- integer searches

def test_relay_anchor_n30():
    r = optimize_relay_count(template(30, 480), spec=WIDE)
    assert r.best == 6 and not r.boundary
    assert r.min_snr_db == pytest.approx(32.95, abs=0.05)
    finite = [v for _, v in r.table if math.isfinite(v)]
    assert min(finite) == r.min_snr_db


def test_relay_anchor_n10_boundary():
    r = optimize_relay_count(template(10, 480), spec=WIDE)
    assert r.best == 9 and r.boundary


def test_relay_nonincreasing_with_rate():
    bests = [optimize_relay_count(template(30, m), spec=WIDE).best for m in (160, 480, 1440)]
    assert bests == sorted(bests, reverse=True)


def test_subchannel_anchor():
    for n in (2, 4, 6):
        r = optimize_subchannels(scheme_config(template(n), "freq_hop"), spec=WIDE)
        assert r.best >= 20


# ----------------------------------------------------------------- phase allocation

def test_grid():
    g = AllocationGrid(0.1)
    pts = g.points(3)
    assert len(pts) == 66 and pts[0] == (4, 3, 3)
    assert g.fractions((5, 5)) == (0.5, 0.5, 0.0)
    with pytest.raises(ValueError):
        AllocationGrid(0.3)


def _grid_argmin(cfg, grid, side, spec):
    rows = []
    for c in grid.points(3):
        fr = grid.fractions(c)
        cf = cfg.with_fractions(f_D=fr) if side == "downlink" else cfg.with_fractions(f_U=fr)
        try:
            s = min_snr(cf, spec, component=side)
        except InfeasibleBracket:
            continue
        rows.append((s, _even_key(c), fr))
    return min(rows)


@pytest.mark.parametrize("side", ["downlink", "uplink"])
def test_allocation_matches_exhaustive(side):
    cfg = scheme_config(template(5), "adaptive_3hop")
    grid = AllocationGrid(0.1)
    res = optimize_phase_allocation(cfg, grid, side, WIDE)
    s, _, fr = _grid_argmin(cfg, grid, side, WIDE)
    assert res.fractions == fr and res.min_snr_db == s
    assert res.evaluations < 66 * WIDE.levels


def test_allocation_small_n():
    res = optimize_phase_allocation(scheme_config(template(1), "adaptive_3hop"), AllocationGrid(0.1),
                                    "downlink", WIDE)
    assert res.fractions == (1.0, 0.0, 0.0)


def test_allocation_needs_multihop():
    with pytest.raises(ValueError):
        optimize_phase_allocation(scheme_config(template(5), "one_hop"))


def test_cycle_allocation_small():
    cfg = scheme_config(template(6), "adaptive_3hop")
    res = optimize_cycle_allocation(cfg, AllocationGrid(0.1), WIDE)
    assert res.p_fail <= 1e-9
    assert res.p_downlink + res.p_uplink <= 1e-9
    assert failure_at(res.config.with_snr_db(res.min_snr_db - WIDE.tolerance_db)) > 1e-9
    even = min_snr(cfg, WIDE)
    assert res.min_snr_db <= even
    # joint optimum is no worse than the half-target per-side split
    d = optimize_phase_allocation(cfg, AllocationGrid(0.1), "downlink", replace(WIDE, target_failure=5e-10))
    u = optimize_phase_allocation(cfg, AllocationGrid(0.1), "uplink", replace(WIDE, target_failure=5e-10))
    assert res.min_snr_db <= max(d.min_snr_db, u.min_snr_db)


# ----------------------------------------------------------------- studies

def test_choose_hops():
    assert choose_hops(template(1), spec=WIDE).best_hops == 1
    assert choose_hops(template(3), spec=WIDE).best_hops == 2
    assert choose_hops(template(10), spec=WIDE).best_hops == 3


def test_choose_hops_aggregate_rate():
    # equal n m / T gives equal decisions
    a = choose_hops(template(10, 160), spec=WIDE)
    b = choose_hops(template(5, 320), spec=WIDE)
    assert aggregate_rate(10, 160, 2e-3, 2e7) == aggregate_rate(5, 320, 2e-3, 2e7)
    assert a.best_hops == b.best_hops


def test_dest_sweep_small():
    rows = dest_sweep(template(), n_total=8, spec=WIDE)
    assert [d for d, _ in rows] == list(range(8))
    vals = [s for d, s in rows[1:]]
    assert vals == sorted(vals)
