"""Minimum-SNR search and the brute-force parameter studies built on it.

Every search runs on a fixed dB lattice

    s_i = lo + i * delta,   delta = (hi - lo) / 2**K,   K = ceil(log2((hi - lo)/tol))

and returns the smallest feasible lattice point.  Because the answer is a
property of the lattice and not of the search path, grid searches may skip
candidates and warm-start from the incumbent without changing the result,
and re-evaluating the engine at a returned SNR reproduces it exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .analytic_generic import generic_failure, harq_failure
from .analytic_star import downlink_failure, scheduling_failure, star_cycle_failure, uplink_failure
from .scenario import (STAR_PROTOCOLS, PhasePlan, ScenarioConfig, TopologySpec,
                       db_to_linear, validate)

FINE_TOL_DB = 1e-4
PRESCAN_STEP_DB = 1.0
_NOISE_REL = 1e-9


class InfeasibleBracket(RuntimeError):
    """The target is not met at the top of the bracket (or is already met
    below its bottom, so the bracket does not straddle the answer)."""


class NonMonotoneScan(RuntimeError):
    """Failure probability increased with SNR beyond numerical noise."""


@dataclass(frozen=True)
class SnrSearchSpec:
    target_failure: float = 1e-9
    bracket_db: tuple = (-20.0, 60.0)
    tolerance_db: float = 0.05
    prescan: bool = True

    def __post_init__(self):
        lo, hi = self.bracket_db
        if not lo < hi:
            raise ValueError("bracket_db needs low < high")
        if not self.tolerance_db > 0:
            raise ValueError("tolerance_db must be > 0")
        if not 0 < self.target_failure < 1:
            raise ValueError("target_failure must lie in (0, 1)")

    @property
    def levels(self) -> int:
        lo, hi = self.bracket_db
        return max(0, math.ceil(math.log2((hi - lo) / self.tolerance_db)))

    @property
    def delta_db(self) -> float:
        lo, hi = self.bracket_db
        return (hi - lo) / 2 ** self.levels

    @property
    def top(self) -> int:
        return 2 ** self.levels

    def snr_db(self, i: int) -> float:
        return self.bracket_db[0] + i * self.delta_db

    def fine(self) -> "SnrSearchSpec":
        return replace(self, tolerance_db=min(self.tolerance_db, FINE_TOL_DB))


def _bisect(ok, lo_excl, hi_incl):
    """Smallest i in (lo_excl, hi_incl] with ok(i), given ok(hi_incl)."""
    while hi_incl - lo_excl > 1:
        mid = (lo_excl + hi_incl) // 2
        if ok(mid):
            hi_incl = mid
        else:
            lo_excl = mid
    return hi_incl


def _prescan(f_db, spec):
    """Coarse scan; returns (last infeasible, first feasible) scan points in dB."""
    lo, hi = spec.bracket_db
    t = spec.target_failure
    xs = list(np.arange(lo, hi, PRESCAN_STEP_DB)) + [hi]
    prev = None
    below = None
    for x in xs:
        p = f_db(float(x))
        if prev is not None and p > prev[1] * (1 + _NOISE_REL) + 1e-300:
            raise NonMonotoneScan(f"P(fail) rises from {prev[1]:.3e} at {prev[0]:.2f} dB "
                                  f"to {p:.3e} at {x:.2f} dB")
        if p <= t:
            return below, float(x)
        below = float(x)
        prev = (float(x), p)
    raise InfeasibleBracket(f"target {t:g} not met at {hi} dB (P = {prev[1]:.3e})")


def _search_index(f_db, spec, hi_index=None):
    """Smallest feasible lattice index, or raise InfeasibleBracket."""
    t = spec.target_failure
    ok = lambda i: f_db(spec.snr_db(i)) <= t  # noqa: E731
    lo_i, hi_i = -1, spec.top if hi_index is None else hi_index
    if spec.prescan and hi_index is None:
        below, above = _prescan(f_db, spec)
        lo0 = spec.bracket_db[0]
        hi_i = min(spec.top, math.ceil((above - lo0) / spec.delta_db - 1e-9))
        if not ok(hi_i):
            hi_i = spec.top
        if below is not None:
            lo_i = max(-1, math.floor((below - lo0) / spec.delta_db + 1e-9))
            if lo_i >= 0 and ok(lo_i):
                lo_i = -1
    if not ok(hi_i):
        raise InfeasibleBracket(f"target {t:g} not met at {spec.snr_db(hi_i):.3f} dB")
    return _bisect(ok, lo_i, hi_i)


def _check_post(f_db, spec, s):
    t = spec.target_failure
    p = f_db(s)
    if p > t:
        raise NonMonotoneScan(f"P(fail) = {p:.3e} > target at the returned {s:.4f} dB")
    below = f_db(s - spec.tolerance_db)
    if below <= t:
        if s <= spec.bracket_db[0]:
            raise InfeasibleBracket(f"target already met at the bracket low end {s} dB")
        raise NonMonotoneScan(f"P(fail) = {below:.3e} <= target one tolerance below {s:.4f} dB")
    return p


def min_snr_db_fn(f_db, spec: SnrSearchSpec | None = None) -> float:
    """Smallest lattice SNR (dB) with f_db(snr_db) <= target."""
    spec = spec or SnrSearchSpec()
    s = spec.snr_db(_search_index(f_db, spec))
    _check_post(f_db, spec, s)
    return s


def min_snr_fn(fn, spec: SnrSearchSpec | None = None) -> float:
    """As min_snr_db_fn for a function of the linear SNR."""
    return min_snr_db_fn(lambda s: fn(db_to_linear(s)), spec)


# ------------------------------------------------------------------ engines

ENGINES = ("analytic", "casewise", "harq")


def failure_at(config: ScenarioConfig, engine: str = "analytic", component: str = "cycle") -> float:
    """Failure probability of ``config`` under the chosen analytic engine.

    ``engine='harq'`` is the full-cycle single-link reference, 'casewise'
    swaps in the rate-ordering form of the three-hop uplink sum.
    ``component`` selects 'cycle', 'downlink', 'uplink' or 'scheduling'
    for star protocols.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    if engine == "harq":
        if component != "cycle":
            raise ValueError("harq has only a cycle component")
        return harq_failure(config)
    if config.topology.kind == "star" and config.protocol in STAR_PROTOCOLS:
        cw = engine == "casewise"
        if component == "downlink":
            return downlink_failure(config)
        if component == "uplink":
            return uplink_failure(config, casewise=cw)
        if component == "scheduling":
            return scheduling_failure(config)
        if component != "cycle":
            raise ValueError(f"unknown component {component!r}")
        if cw:
            return min(1.0, downlink_failure(config) + uplink_failure(config, casewise=True)
                       + scheduling_failure(config))
        return star_cycle_failure(config).p_cycle_bound
    if component != "cycle":
        raise ValueError(f"{config.protocol} has only a cycle component")
    return generic_failure(config)


def _f_db(config, engine, component):
    return lambda s: failure_at(config.with_snr_db(s), engine, component)


def min_snr(config: ScenarioConfig, spec: SnrSearchSpec | None = None, engine: str = "analytic",
            component: str = "cycle") -> float:
    """Minimum nominal SNR (dB) meeting the target for this config."""
    validate(config)
    return min_snr_db_fn(_f_db(config, engine, component), spec)


# ------------------------------------------------------------ scheme configs

SWEEP_SCHEMES = ("one_hop", "harq", "nonsim_relay", "freq_hop", "fixed_2hop", "adaptive_3hop")
_EXTRA_SCHEMES = ("fixed_3hop", "adaptive_2hop", "adaptive_3hop_even", "duty_cycled")


def scheme_config(template: ScenarioConfig, scheme: str, n: int | None = None, **knobs) -> ScenarioConfig:
    """Star config for a named scheme, inheriting channel, m, T and toggles
    from ``template``.  'harq' maps to the one-hop config (use engine='harq')."""
    n = template.n if n is None else n
    base = dict(topology=TopologySpec(n), relays=None, hops=None, subchannels=None, duty_pct=None)
    f_S = template.phase_plan.f_S
    if scheme in ("one_hop", "harq"):
        cfg = replace(template, protocol="one_hop", phase_plan=PhasePlan.even(1), **base)
    elif scheme in ("fixed_2hop", "fixed_3hop"):
        cfg = replace(template, protocol=scheme, phase_plan=PhasePlan.even(int(scheme[6])), **base)
    elif scheme in ("adaptive_2hop", "adaptive_3hop", "adaptive_3hop_even"):
        proto = scheme.replace("_even", "")
        pp = PhasePlan.even(int(proto[9]), f_S if not template.ideal_scheduling else 0.0)
        cfg = replace(template, protocol=proto, phase_plan=pp, **base)
    elif scheme == "nonsim_relay":
        base.update(relays=knobs.get("relays", 0), hops=knobs.get("hops", template.hops or 2))
        cfg = replace(template, protocol=scheme, phase_plan=PhasePlan.even(2), **base)
    elif scheme == "freq_hop":
        base.update(subchannels=knobs.get("subchannels", 1))
        cfg = replace(template, protocol=scheme, phase_plan=PhasePlan.even(1), **base)
    elif scheme == "duty_cycled":
        base.update(duty_pct=knobs.get("duty_pct", 100.0))
        cfg = replace(template, protocol=scheme, phase_plan=PhasePlan.even(2), **base)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return cfg


# ---------------------------------------------------------- integer searches

@dataclass(frozen=True)
class ParamSearch:
    name: str
    best: int
    min_snr_db: float
    boundary: bool
    table: tuple = ()


def _integer_search(make, values, spec, name, engine="analytic"):
    """Min over integer knob values of the fine-lattice min SNR, with the
    full (value, min_snr_db) table; infeasible values get inf.  Ties go to
    the smaller value."""
    fine = spec.fine()
    values = sorted(set(int(v) for v in values))
    if not values:
        raise ValueError(f"empty {name} range")
    table = []
    for v in values:
        f = _f_db(make(v), engine, "cycle")
        try:
            i = _search_index(f, replace(fine, prescan=False))
        except InfeasibleBracket:
            table.append((v, math.inf))
            continue
        table.append((v, fine.snr_db(i)))
    feasible = [(s, v) for v, s in table if math.isfinite(s)]
    if not feasible:
        raise InfeasibleBracket(f"no {name} in range meets the target")
    s_best, v = min(feasible)
    s = min_snr(make(v), fine, engine)
    if s != s_best:
        raise NonMonotoneScan(f"{name}={v}: full search moved the optimum")
    boundary = len(values) > 1 and v in (values[0], values[-1])
    return ParamSearch(name, v, s, boundary, tuple(table))


def optimize_relay_count(config: ScenarioConfig, r_range=None, spec: SnrSearchSpec | None = None,
                         hops: int | None = None) -> ParamSearch:
    """Best number of designated relays for non-simultaneous relaying."""
    spec = spec or SnrSearchSpec()
    hops = hops or config.hops or 2
    if r_range is None:
        r_range = range(0, config.topology.total_nodes - 1)
    make = lambda r: scheme_config(config, "nonsim_relay", relays=r, hops=hops)  # noqa: E731
    return _integer_search(make, r_range, spec, "relays")


def optimize_subchannels(config: ScenarioConfig, k_range=range(1, 129),
                         spec: SnrSearchSpec | None = None) -> ParamSearch:
    """Best frequency-hopping repetition count k_fh."""
    spec = spec or SnrSearchSpec()
    make = lambda k: scheme_config(config, "freq_hop", subchannels=k)  # noqa: E731
    return _integer_search(make, k_range, spec, "subchannels")


# ----------------------------------------------------------- phase allocation

@dataclass(frozen=True)
class AllocationGrid:
    step: float = 0.02

    def __post_init__(self):
        if not 0 < self.step <= 1:
            raise ValueError("step must lie in (0, 1]")
        if abs(round(1 / self.step) * self.step - 1) > 1e-12:
            raise ValueError("step must divide 1")

    @property
    def divisions(self) -> int:
        return int(round(1 / self.step))

    def points(self, phases: int = 3):
        """Lattice counts (c1, .., c_phases) summing to the divisions, most even first."""
        D = self.divisions
        if phases == 1:
            pts = [(D,)]
        elif phases == 2:
            pts = [(i, D - i) for i in range(D + 1)]
        else:
            pts = [(i, j, D - i - j) for i in range(D + 1) for j in range(D + 1 - i)]
        return sorted(pts, key=_even_key)

    def fractions(self, counts):
        D = self.divisions
        fr = [c / D for c in counts] + [0.0] * (3 - len(counts))
        return tuple(fr)


def _even_key(counts):
    # most even first, then longer early phases
    return (sum(c * c for c in counts), tuple(-c for c in counts))


@dataclass(frozen=True)
class AllocationResult:
    side: str
    fractions: tuple
    min_snr_db: float
    p_fail: float
    candidates: int
    evaluations: int


def _side_setter(config, side):
    if side in ("downlink", "D"):
        return "downlink", lambda fr: config.with_fractions(f_D=fr)
    if side in ("uplink", "U"):
        return "uplink", lambda fr: config.with_fractions(f_U=fr)
    raise ValueError("side must be 'downlink' or 'uplink'")


def optimize_phase_allocation(config: ScenarioConfig, grid: AllocationGrid | None = None,
                              side: str = "downlink", spec: SnrSearchSpec | None = None,
                              engine: str = "analytic") -> AllocationResult:
    """Exhaustive grid search over one side's phase fractions.

    Candidates whose failure at the incumbent SNR already exceeds the
    target cannot win and cost one evaluation; ties at the same lattice SNR
    go to the most even allocation, then lexicographically.
    """
    grid = grid or AllocationGrid()
    spec = spec or SnrSearchSpec()
    component, setter = _side_setter(config, side)
    t = spec.target_failure
    hops = config.n_hops if config.protocol in STAR_PROTOCOLS else 0
    if hops < 2:
        raise ValueError("phase allocation needs a multi-hop star protocol")
    counts_list = grid.points(hops)
    best = None  # (index, key, counts)
    n_eval = [0]

    for counts in counts_list:
        cfg = setter(grid.fractions(counts))
        f0 = _f_db(cfg, engine, component)

        def f(s, f0=f0):
            n_eval[0] += 1
            return f0(s)
        if best is None:
            try:
                i = _search_index(f, replace(spec, prescan=False))
            except InfeasibleBracket:
                continue
        else:
            bi = best[0]
            if f(spec.snr_db(bi)) > t:
                continue
            if bi == 0 or f(spec.snr_db(bi - 1)) > t:
                i = bi
            else:
                i = _bisect(lambda k: f(spec.snr_db(k)) <= t, -1, bi - 1)
        cand = (i, _even_key(counts), counts)
        if best is None or cand < best:
            best = cand
    if best is None:
        raise InfeasibleBracket("no allocation on the grid meets the target")
    fr = grid.fractions(best[2])
    cfg = setter(fr)
    s = min_snr(cfg, spec, engine, component)
    if s != spec.snr_db(best[0]):
        raise NonMonotoneScan("grid optimum moved under a full re-search")
    p = failure_at(cfg.with_snr_db(s), engine, component)
    return AllocationResult(component, fr, s, p, len(counts_list), n_eval[0])


@dataclass(frozen=True)
class CycleAllocation:
    f_D: tuple
    f_U: tuple
    min_snr_db: float
    p_fail: float
    p_downlink: float
    p_uplink: float
    p_scheduling: float
    config: ScenarioConfig = field(repr=False, default=None)


def optimize_cycle_allocation(config: ScenarioConfig, grid: AllocationGrid | None = None,
                              spec: SnrSearchSpec | None = None,
                              engine: str = "analytic") -> CycleAllocation:
    """Jointly choose downlink and uplink fractions minimising the SNR at
    which p_D + p_U + p_S meets the target.

    Since the sides share only the SNR, the cycle is feasible at s iff
    min_fD p_D(s) + min_fU p_U(s) + p_S(s) <= target.  The per-side optima at
    half the target give a feasible upper end; only allocations meeting
    the full target there can matter below it, so the final lattice
    bisection scans just those.
    """
    grid = grid or AllocationGrid()
    spec = spec or SnrSearchSpec()
    t = spec.target_failure
    half = replace(spec, target_failure=t / 2)
    rD = optimize_phase_allocation(config, grid, "downlink", half, engine)
    rU = optimize_phase_allocation(config, grid, "uplink", half, engine)
    base = config.with_fractions(f_D=rD.fractions, f_U=rU.fractions)
    f_fixed = _f_db(base, engine, "cycle")
    hi_i = _search_index(f_fixed, replace(spec, prescan=False))
    s_hi = spec.snr_db(hi_i)

    hops = config.n_hops
    pts = [grid.fractions(c) for c in grid.points(hops)]
    surv = {}
    for side in ("downlink", "uplink"):
        comp, setter = _side_setter(config, side)
        surv[side] = [fr for fr in pts
                      if failure_at(setter(fr).with_snr_db(s_hi), engine, comp) <= t]

    def best_side(side, s):
        comp, setter = _side_setter(config, side)
        vals = [(failure_at(setter(fr).with_snr_db(s), engine, comp),
                 _even_key(tuple(round(x * grid.divisions) for x in fr)), fr) for fr in surv[side]]
        return min(vals) if vals else (math.inf, None, None)

    def total(s):
        pd = best_side("downlink", s)
        pu = best_side("uplink", s)
        ps = failure_at(config.with_snr_db(s), engine, "scheduling") if config.adaptive else 0.0
        return pd, pu, ps, min(1.0, pd[0] + pu[0] + ps)

    i = _bisect(lambda k: total(spec.snr_db(k))[3] <= t, -1, hi_i)
    s = spec.snr_db(i)
    pd, pu, ps, _ = total(s)
    below = total(s - spec.tolerance_db)[3]
    if below <= t:
        if s <= spec.bracket_db[0]:
            raise InfeasibleBracket(f"target already met at the bracket low end {s} dB")
        raise NonMonotoneScan(f"joint failure {below:.3e} <= target one tolerance below {s:.4f} dB")
    final = config.with_fractions(f_D=pd[2], f_U=pu[2]).with_snr_db(s)
    p = failure_at(final, engine, "cycle")
    if p > t:
        raise NonMonotoneScan("joint optimum fails the target on re-evaluation")
    return CycleAllocation(pd[2], pu[2], s, p, pd[0], pu[0], ps, final)


# ---------------------------------------------------------------- studies

@dataclass(frozen=True)
class SweepRow:
    scheme: str
    n: int
    min_snr_db: float
    inner_param: int | None = None
    inner_name: str | None = None


def scheme_min_snr(template: ScenarioConfig, scheme: str, n: int, spec: SnrSearchSpec | None = None,
                   grid: AllocationGrid | None = None) -> SweepRow:
    spec = spec or SnrSearchSpec()
    if scheme == "nonsim_relay":
        r = optimize_relay_count(scheme_config(template, scheme, n), spec=spec)
        return SweepRow(scheme, n, r.min_snr_db, r.best, "relays")
    if scheme == "freq_hop":
        r = optimize_subchannels(scheme_config(template, scheme, n), spec=spec)
        return SweepRow(scheme, n, r.min_snr_db, r.best, "subchannels")
    if scheme == "adaptive_3hop":
        cfg = scheme_config(template, scheme, n)
        return SweepRow(scheme, n, optimize_cycle_allocation(cfg, grid, spec).min_snr_db)
    engine = "harq" if scheme == "harq" else "analytic"
    return SweepRow(scheme, n, min_snr(scheme_config(template, scheme, n), spec, engine))


def sweep_min_snr(template: ScenarioConfig, n_values, schemes=SWEEP_SCHEMES,
                  spec: SnrSearchSpec | None = None, grid: AllocationGrid | None = None):
    """One min-SNR per (scheme, n); rows ordered by scheme then n."""
    for sc in schemes:
        if sc not in SWEEP_SCHEMES + _EXTRA_SCHEMES:
            raise ValueError(f"unknown scheme {sc!r}")
    return [scheme_min_snr(template, sc, int(n), spec, grid) for sc in schemes for n in n_values]


@dataclass(frozen=True)
class HopChoice:
    n: int
    best_hops: int
    min_snr_db: float
    per_hops: tuple


def aggregate_rate(n, message_bits, cycle_time_s, bandwidth_hz):
    """Total star goodput n*m*2/T in bits/s/Hz."""
    return n * message_bits * 2 / (cycle_time_s * bandwidth_hz)


def choose_hops(config: ScenarioConfig, candidates=(1, 2, 3), spec: SnrSearchSpec | None = None,
                schedule: str = "fixed") -> HopChoice:
    """Best hop count with unoptimised even phase splits; ties go to fewer hops."""
    spec = spec or SnrSearchSpec()
    if schedule not in ("fixed", "adaptive"):
        raise ValueError("schedule must be 'fixed' or 'adaptive'")
    rows = []
    for h in candidates:
        if h == 1:
            name = "one_hop"
        else:
            name = f"{schedule}_{h}hop"
        cfg = scheme_config(config, name)
        try:
            s = min_snr(cfg, spec)
        except InfeasibleBracket:
            s = math.inf
        rows.append((h, s))
    h, s = min(rows, key=lambda r: (r[1], r[0]))
    if not math.isfinite(s):
        raise InfeasibleBracket("no hop count meets the target")
    return HopChoice(config.n, h, s, tuple(rows))


def dest_sweep(config: ScenarioConfig, n_total: int | None = None, destinations=None,
               spec: SnrSearchSpec | None = None, hops: int = 2):
    """Rows (d, min_snr_db) for a generic topology of ``n_total`` nodes, one
    stream per node, d subscribers each, fixed ``hops``-hop union bound.
    The d = 0 row is the star with the same number of devices."""
    spec = spec or SnrSearchSpec()
    N = n_total or config.topology.total_nodes
    if N < 3:
        raise ValueError("need at least 3 nodes")
    ds = list(destinations) if destinations is not None else list(range(1, N))
    proto = "fixed_2hop" if hops == 2 else "fixed_3hop"
    star = scheme_config(config, proto, N - 1)
    rows = [(0, min_snr(star, spec))]
    for d in ds:
        cfg = replace(star, topology=TopologySpec(N, "generic", n_streams=N, avg_subscribers=d),
                      ideal_scheduling=False)
        rows.append((int(d), min_snr(cfg, spec)))
    return rows


def duty_cycle_study(config: ScenarioConfig, duty_grid=None, background_power_db=10.0,
                     spec: SnrSearchSpec | None = None):
    """Power rows (see analytic_generic.power_curve) and the total-power minimiser."""
    from .analytic_generic import power_curve
    if duty_grid is None:
        duty_grid = range(2, 101, 2)
    cfg = scheme_config(config, "duty_cycled")
    rows = power_curve(cfg, list(duty_grid), background_power_db, spec)
    best = min(rows, key=lambda r: (r[3], -r[0]))
    return rows, best


__all__ = [
    "AllocationGrid", "AllocationResult", "CycleAllocation", "HopChoice", "InfeasibleBracket",
    "NonMonotoneScan", "ParamSearch", "SnrSearchSpec", "SweepRow", "aggregate_rate", "choose_hops",
    "dest_sweep", "duty_cycle_study", "failure_at", "min_snr", "min_snr_db_fn", "min_snr_fn",
    "optimize_cycle_allocation", "optimize_phase_allocation", "optimize_relay_count",
    "optimize_subchannels", "scheme_config", "scheme_min_snr", "sweep_min_snr",
]
