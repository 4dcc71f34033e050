"""Command-line front end.

Scenario files are flat ``key = value`` text, one pair per line; ``#``
starts a comment.  Keys are the leaf field names of ScenarioConfig, except
that the SNR is given as ``snr_db``.  Phase fractions are comma lists
(``f_D = 0.5, 0.2, 0.3``).  Unknown or repeated keys are errors.

Exit status: 0 ok, 1 configuration or usage error, 2 infeasible search,
3 analytic/Monte Carlo disagreement (some |z| > 3).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace

from .analytic_generic import InfeasibleDuty, generic_failure
from .analytic_star import star_cycle_failure
from .optimizer import (SWEEP_SCHEMES, AllocationGrid, InfeasibleBracket, NonMonotoneScan,
                        SnrSearchSpec, aggregate_rate, choose_hops, dest_sweep, duty_cycle_study,
                        min_snr_db_fn, optimize_cycle_allocation, optimize_phase_allocation,
                        optimize_relay_count, scheme_config, scheme_min_snr)
from .scenario import (STAR_PROTOCOLS, ChannelParams, ConfigError, InvalidField, PhasePlan,
                       ScenarioConfig, TopologySpec, validate)
from .simulator import Z95, block_rng, draw_fades, estimate_components, n_devices, simulate_cycle

SCHEMA_VERSION = 1
COMMANDS = ("analyze", "simulate", "validate", "sweep", "optimize-phases", "optimize-relays",
            "choose-hops", "duty-cycle", "dest-sweep")

_REQUIRED = ("n_nodes", "snr_db", "bandwidth_hz", "message_bits", "cycle_time_s", "protocol")
_TYPES = {
    "n_nodes": int, "kind": str, "n_streams": int, "avg_subscribers": int,
    "snr_db": float, "bandwidth_hz": float, "message_bits": float, "cycle_time_s": float,
    "protocol": str, "f_D": "fractions", "f_U": "fractions", "f_S": float,
    "downlink_budget_s": float, "uplink_budget_s": float,
    "relays": int, "hops": int, "subchannels": int, "duty_pct": float,
    "sched_overhead": bool, "ack_bit": bool, "ideal_scheduling": bool, "sched_hops": int,
}
SCENARIO_KEYS = tuple(_TYPES)


class ScenarioFileError(ConfigError):
    pass


def _convert(key, raw):
    kind = _TYPES[key]
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    try:
        if kind == "fractions":
            vals = tuple(float(v) for v in raw.split(","))
            return vals + (0.0,) * (3 - len(vals))
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind is int:
            v = float(raw)
            if v != int(v):
                raise ValueError(raw)
            return int(v)
        return kind(raw)
    except ValueError:
        raise ScenarioFileError(key, f"cannot parse {raw!r}") from None


def parse_scenario(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioFileError(f"line {lineno}", "expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ScenarioFileError(key, f"unknown key on line {lineno}")
        if key in out:
            raise ScenarioFileError(key, f"repeated on line {lineno}")
        out[key] = _convert(key, val)
    return out


def config_from_mapping(kv: dict) -> ScenarioConfig:
    for k in kv:
        if k not in _TYPES:
            raise ScenarioFileError(k, "unknown key")
    missing = [k for k in _REQUIRED if kv.get(k) is None]
    if missing:
        raise ScenarioFileError(missing[0], "required")
    kind = kv.get("kind") or "star"
    top = TopologySpec(kv["n_nodes"], kind, kv.get("n_streams"),
                       kv.get("avg_subscribers") or 1)
    proto = kv["protocol"]
    tmp = ScenarioConfig(top, ChannelParams(1.0, 1.0), 1, 1, proto, hops=kv.get("hops"))
    hops = tmp.n_hops if proto in STAR_PROTOCOLS else 2
    even = PhasePlan.even(hops)
    pp = PhasePlan(kv.get("f_D") or even.f_D, kv.get("f_U") or even.f_U, kv.get("f_S") or 0.0,
                   kv.get("downlink_budget_s"), kv.get("uplink_budget_s"))
    opt = {k: kv[k] for k in ("sched_overhead", "ack_bit", "ideal_scheduling") if kv.get(k) is not None}
    cfg = ScenarioConfig(top, ChannelParams.from_db(kv["snr_db"], kv["bandwidth_hz"]),
                         kv["message_bits"], kv["cycle_time_s"], proto, pp,
                         relays=kv.get("relays"), hops=kv.get("hops"),
                         subchannels=kv.get("subchannels"), duty_pct=kv.get("duty_pct"),
                         sched_hops=kv.get("sched_hops"), **opt)
    return validate(cfg)


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioFileError("scenario", str(exc)) from None
    return config_from_mapping(parse_scenario(text))


def config_to_mapping(cfg: ScenarioConfig) -> dict:
    """Fully resolved flat view; feeding it back reproduces ``cfg``."""
    top, pp = cfg.topology, cfg.phase_plan
    return {
        "n_nodes": top.n_nodes, "kind": top.kind, "n_streams": top.n_streams,
        "avg_subscribers": top.avg_subscribers, "snr_db": cfg.channel.snr_db,
        "bandwidth_hz": cfg.channel.bandwidth_hz, "message_bits": cfg.message_bits,
        "cycle_time_s": cfg.cycle_time_s, "protocol": cfg.protocol,
        "f_D": list(pp.f_D), "f_U": list(pp.f_U), "f_S": pp.f_S,
        "downlink_budget_s": pp.downlink_budget_s, "uplink_budget_s": pp.uplink_budget_s,
        "relays": cfg.relays, "hops": cfg.hops, "subchannels": cfg.subchannels,
        "duty_pct": cfg.duty_pct, "sched_overhead": cfg.sched_overhead, "ack_bit": cfg.ack_bit,
        "ideal_scheduling": cfg.ideal_scheduling, "sched_hops": cfg.sched_hops,
    }


def format_scenario(cfg: ScenarioConfig) -> str:
    lines = []
    for k, v in config_to_mapping(cfg).items():
        if isinstance(v, list):
            v = ", ".join(repr(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ output

def _num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _result(command, cfg, columns, rows, summary, args, spec=None):
    search = None
    if spec is not None:
        search = {"target_failure": spec.target_failure, "bracket_db": list(spec.bracket_db),
                  "tolerance_db": spec.tolerance_db}
        if args.grid_step is not None:
            search["grid_step"] = args.grid_step
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config_to_mapping(cfg),
        "search": search,
        "run": {"seed": args.seed, "trials": args.trials},
        "columns": list(columns),
        "rows": [{c: r[i] for i, c in enumerate(columns)} for r in rows],
        "summary": dict(summary),
    }


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, (list, tuple)):
        return ";".join(_csv_cell(x) for x in v)
    return str(v)


def render(result: dict, fmt: str) -> str:
    if fmt == "json":
        out = dict(result, rows=[{k: _num(v) for k, v in r.items()} for r in result["rows"]],
                   summary={k: _num(v) for k, v in result["summary"].items()})
        return json.dumps(out, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema_version={result['schema_version']}\n# command={result['command']}\n")
    for k, v in result["config"].items():
        buf.write(f"# config.{k}={_csv_cell(v)}\n")
    for sect in ("search", "run", "summary"):
        for k, v in (result[sect] or {}).items():
            buf.write(f"# {sect}.{k}={_csv_cell(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result["columns"])
    for row in result["rows"]:
        w.writerow([_csv_cell(row[c]) for c in result["columns"]])
    return buf.getvalue()


# ---------------------------------------------------------------- commands

def _need_mc(args):
    if args.trials is None or args.seed is None:
        raise InvalidField("trials/seed", f"{args.command} requires --trials and --seed")
    if args.trials < 1:
        raise InvalidField("trials", "must be >= 1")


def _is_star(cfg):
    return cfg.topology.kind == "star" and cfg.protocol in STAR_PROTOCOLS


def cmd_analyze(cfg, args, spec):
    if _is_star(cfg):
        b = star_cycle_failure(cfg)
        rows = [("downlink", b.p_downlink), ("uplink", b.p_uplink),
                ("scheduling", b.p_scheduling), ("cycle_bound", b.p_cycle_bound)]
        summary = {"p_cycle_bound": b.p_cycle_bound}
    else:
        p = generic_failure(cfg)
        rows = [("cycle_bound", p)]
        summary = {"p_cycle_bound": p}
    return ("component", "p_fail"), rows, summary, 0


def _trace(cfg, args):
    fades = draw_fades(block_rng(args.seed, 0), 1, n_devices(cfg))[0]
    lines = []
    if cfg.protocol == "freq_hop" and (cfg.subchannels or 1) > 1:
        lines.append("trace unavailable: frequency hopping draws extra sub-channel fades")
    else:
        simulate_cycle(cfg, fades, trace=lines)
    for ln in lines:
        print(ln, file=sys.stderr)


def cmd_simulate(cfg, args, spec):
    _need_mc(args)
    if args.trace:
        _trace(cfg, args)
    est = estimate_components(cfg, args.trials, args.seed, args.workers)
    rows = [(k, v.p, v.failures, v.trials, v.ci_halfwidth) for k, v in est.items()]
    c = est["cycle"]
    return (("component", "p_fail", "failures", "trials", "ci_halfwidth"), rows,
            {"p_cycle": c.p, "ci_halfwidth": c.ci_halfwidth}, 0)


def agreement_rows(cfg, trials, seed, workers=1):
    """Rows (component, variant, kind, analytic, mc, halfwidth, z).

    Exact engines give a two-sided z; union bounds only fail when the MC
    estimate sits above the bound (z > 3).  For an adaptive schedule with
    non-ideal scheduling the exact downlink/uplink engines are checked on
    the ideal-scheduling variant and the cycle bound on the config itself.
    """
    def z(mc, an, hw):
        se = hw / Z95
        return (mc - an) / se if se > 0 else (0.0 if mc == an else math.inf)

    rows = []
    if _is_star(cfg):
        exact_cfg = cfg
        variant = "as_given"
        if cfg.adaptive and not cfg.ideal_scheduling:
            exact_cfg = replace(cfg, ideal_scheduling=True)
            variant = "ideal_scheduling"
        b = star_cycle_failure(exact_cfg)
        est = estimate_components(exact_cfg, trials, seed, workers)
        for comp, an in (("downlink", b.p_downlink), ("uplink", b.p_uplink)):
            e = est[comp]
            rows.append((comp, variant, "exact", an, e.p, e.ci_halfwidth, z(e.p, an, e.ci_halfwidth)))
        if variant != "as_given":
            b = star_cycle_failure(cfg)
            est = estimate_components(cfg, trials, seed, workers)
        e = est["cycle"]
        rows.append(("cycle", "as_given", "bound", b.p_cycle_bound, e.p, e.ci_halfwidth,
                     z(e.p, b.p_cycle_bound, e.ci_halfwidth)))
    else:
        an = generic_failure(cfg)
        e = estimate_components(cfg, trials, seed, workers)["cycle"]
        kind = "exact" if cfg.protocol == "freq_hop" else "bound"
        rows.append(("cycle", "as_given", kind, an, e.p, e.ci_halfwidth, z(e.p, an, e.ci_halfwidth)))
    return rows


def _disagrees(row):
    kind, zz = row[2], row[6]
    return abs(zz) > 3 if kind == "exact" else zz > 3


def cmd_validate(cfg, args, spec):
    _need_mc(args)
    rows = agreement_rows(cfg, args.trials, args.seed, args.workers)
    bad = [r for r in rows if _disagrees(r)]
    zs = [abs(r[6]) for r in rows]
    return (("component", "variant", "kind", "analytic", "monte_carlo", "ci_halfwidth", "z"), rows,
            {"max_abs_z": max(zs), "agree": not bad}, 3 if bad else 0)


def _n_values(args, cfg):
    if args.n_range:
        a, _, b = args.n_range.partition(":")
        lo, hi = int(a), int(b or a)
        if not 1 <= lo <= hi:
            raise InvalidField("n_range", "need 1 <= lo <= hi")
        return list(range(lo, hi + 1))
    return [cfg.n]


def cmd_sweep(cfg, args, spec):
    schemes = args.schemes.split(",") if args.schemes else list(SWEEP_SCHEMES)
    rows, infeasible = [], 0
    for sc in schemes:
        for n in _n_values(args, cfg):
            try:
                r = scheme_min_snr(cfg, sc.strip(), n, spec, _grid(args))
                rows.append((r.scheme, r.n, r.min_snr_db, r.inner_param))
            except InfeasibleBracket:
                infeasible += 1
                rows.append((sc.strip(), n, math.inf, None))
    return (("scheme", "n", "min_snr_db", "inner_param"), rows,
            {"infeasible_points": infeasible}, 2 if infeasible else 0)


def _grid(args):
    return AllocationGrid(args.grid_step if args.grid_step is not None else 0.02)


def cmd_optimize_phases(cfg, args, spec):
    grid = _grid(args)
    cols = ("side", "f1", "f2", "f3", "min_snr_db", "p_fail")
    if args.side == "cycle":
        r = optimize_cycle_allocation(cfg, grid, spec)
        rows = [("downlink", *r.f_D, r.min_snr_db, r.p_downlink),
                ("uplink", *r.f_U, r.min_snr_db, r.p_uplink),
                ("cycle", None, None, None, r.min_snr_db, r.p_fail)]
        return cols, rows, {"min_snr_db": r.min_snr_db}, 0
    r = optimize_phase_allocation(cfg, grid, args.side, spec)
    return cols, [(r.side, *r.fractions, r.min_snr_db, r.p_fail)], {"min_snr_db": r.min_snr_db}, 0


def cmd_optimize_relays(cfg, args, spec):
    rr = None
    if args.r_range:
        a, _, b = args.r_range.partition(":")
        rr = range(int(a), int(b or a) + 1)
    r = optimize_relay_count(cfg, rr, spec)
    rows = [(v, s) for v, s in r.table]
    return (("relays", "min_snr_db"), rows,
            {"best_relays": r.best, "min_snr_db": r.min_snr_db, "boundary": r.boundary}, 0)


def cmd_choose_hops(cfg, args, spec):
    rows = []
    for n in _n_values(args, cfg):
        c = choose_hops(scheme_config(cfg, "one_hop", n), spec=spec)
        per = dict(c.per_hops)
        rows.append((n, aggregate_rate(n, cfg.message_bits, cfg.cycle_time_s, cfg.channel.bandwidth_hz),
                     c.best_hops, c.min_snr_db, per.get(1), per.get(2), per.get(3)))
    return (("n", "aggregate_rate", "best_hops", "min_snr_db", "snr_1hop", "snr_2hop", "snr_3hop"),
            rows, {}, 0)


def cmd_duty_cycle(cfg, args, spec):
    step = 100 * (args.grid_step if args.grid_step is not None else 0.02)
    k = int(round(100 / step))
    grid = [step * i for i in range(1, k + 1)]
    rows, best = duty_cycle_study(cfg, grid, args.background_db, spec)
    return (("duty_pct", "awake_tx_snr_db", "avg_tx_power_db", "avg_total_power_db"), rows,
            {"best_duty_pct": best[0], "background_power_db": args.background_db}, 0)


def cmd_dest_sweep(cfg, args, spec):
    rows = dest_sweep(cfg, args.n_total, spec=spec)
    return ("destinations", "min_snr_db"), rows, {}, 0


_HANDLERS = {
    "analyze": cmd_analyze, "simulate": cmd_simulate, "validate": cmd_validate,
    "sweep": cmd_sweep, "optimize-phases": cmd_optimize_phases,
    "optimize-relays": cmd_optimize_relays, "choose-hops": cmd_choose_hops,
    "duty-cycle": cmd_duty_cycle, "dest-sweep": cmd_dest_sweep,
}


# ------------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _bracket(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LOW,HIGH") from None
    return (lo, hi)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--scenario", required=True, help="flat key = value scenario file")
    common.add_argument("--out", default="-", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--grid-step", type=float, help="phase-fraction / duty grid step (0.02)")
    common.add_argument("--bracket-db", type=_bracket, default=(-20.0, 60.0))
    common.add_argument("--tolerance-db", type=float, default=0.05)
    common.add_argument("--target", type=float, default=1e-9)
    common.add_argument("--ideal-scheduling", action="store_true",
                        help="ACK information delivered for free")
    common.add_argument("--appendix-overheads", choices=("on", "off"),
                        help="scheduling-overhead and ACK-bit terms (default: scenario file)")
    common.add_argument("--trace", action="store_true", help="print a one-cycle trace to stderr")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="occupycow", description="Reliability analysis for cooperative low-latency "
                "wireless cycles.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name in ("sweep", "choose-hops"):
            sp.add_argument("--n-range", help="LO:HI node counts (inclusive)")
        if name == "sweep":
            sp.add_argument("--schemes", help="comma list, default " + ",".join(SWEEP_SCHEMES))
        if name == "optimize-phases":
            sp.add_argument("--side", choices=("downlink", "uplink", "cycle"), default="cycle")
        if name == "optimize-relays":
            sp.add_argument("--r-range", help="LO:HI relay counts (inclusive)")
        if name == "duty-cycle":
            sp.add_argument("--background-db", type=float, default=10.0)
        if name == "dest-sweep":
            sp.add_argument("--n-total", type=int, help="nodes in the generic topology")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_scenario(args.scenario)
        if args.ideal_scheduling:
            cfg = replace(cfg, ideal_scheduling=True)
        if args.appendix_overheads is not None:
            on = args.appendix_overheads == "on"
            cfg = replace(cfg, sched_overhead=on, ack_bit=on)
        validate(cfg)
        spec = SnrSearchSpec(args.target, tuple(args.bracket_db), args.tolerance_db)
        if args.grid_step is not None:
            AllocationGrid(args.grid_step)
        cols, rows, summary, code = _HANDLERS[args.command](cfg, args, spec)
    except (InfeasibleBracket, InfeasibleDuty, NonMonotoneScan) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    uses_search = args.command not in ("analyze", "simulate", "validate")
    res = _result(args.command, cfg, cols, rows, summary, args, spec if uses_search else None)
    text = render(res, args.format)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    if args.verbose:
        print(f"{args.command}: {len(rows)} rows, exit {code}", file=sys.stderr)
    return code


def main(argv=None):
    raise SystemExit(run(argv))


def tune_snr_db(cfg: ScenarioConfig, p_target: float, component: str = "cycle",
                bracket=(-30.0, 60.0)) -> float:
    """Smallest SNR (fine lattice) at which the analytic ``component`` is <= p_target."""
    from .optimizer import failure_at
    spec = SnrSearchSpec(p_target, bracket, 1e-3, prescan=False)
    return min_snr_db_fn(lambda s: failure_at(cfg.with_snr_db(s), "analytic", component), spec)


if __name__ == "__main__":
    main()
