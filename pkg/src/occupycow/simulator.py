"""Monte Carlo execution of the protocol over persistent per-cycle Rayleigh
fades, plus an exhaustive enumerator for very small stars.

Fades are drawn as a symmetric matrix of Exp(1) power gains per trial.  A
link supports rate R iff gain >= (2^(R/W) - 1)/SNR, re-evaluated for each
phase rate, so later phases see the same fade as earlier ones.

Random numbers come from numpy's Philox generator keyed by (seed, block),
with a fixed block size, so results do not depend on how blocks are
distributed over workers.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic_generic import duty_relays, generic_rate
from .fading import outage_threshold
from .scenario import STAR_PROTOCOLS, FailureProbability, ScenarioConfig, phase_rates

BLOCK = 1 << 15
Z95 = 1.959963984540054


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, block], dtype=np.uint64)))


def n_devices(config):
    return config.topology.total_nodes


def draw_fades(rng, trials, N):
    """Symmetric (trials, N, N) Exp(1) gains; the diagonal is zero."""
    iu = np.triu_indices(N, 1)
    g = np.zeros((trials, N, N))
    vals = rng.standard_exponential((trials, len(iu[0])))
    g[:, iu[0], iu[1]] = vals
    g[:, iu[1], iu[0]] = vals
    return g


def wilson_halfwidth(failures, trials, z=Z95):
    p = failures / trials
    den = 1 + z * z / trials
    return z / den * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))


@dataclass
class CycleOutcome:
    """Per-pair result.  Hop arrays hold 1, 2 or 3 for the hop of success and
    0 for a failed pair.  For a star the downlink pairs are (C -> node i) and
    the uplink pairs (node i -> C); for generic topologies only ``pair_hop``
    is filled, with one column per (stream, subscriber)."""
    downlink_hop: np.ndarray | None
    uplink_hop: np.ndarray | None
    scheduling_disseminated: np.ndarray | None
    pair_hop: np.ndarray | None = None

    @property
    def downlink_failed(self):
        return (self.downlink_hop == 0).any(-1)

    @property
    def uplink_failed(self):
        return (self.uplink_hop == 0).any(-1)

    @property
    def cycle_failed(self):
        if self.pair_hop is not None:
            return (self.pair_hop == 0).any(-1)
        return self.downlink_failed | self.uplink_failed


def _thr(config, rate):
    ch = config.channel
    return outage_threshold(rate, ch.snr_linear, ch.bandwidth_hz)


def _fmt(mask):
    return "{" + ",".join(str(i) for i in np.flatnonzero(mask)) + "}"


def _star(config, G, sides=("D", "U"), trace=None):
    B = G.shape[0]
    n = config.n
    hops = config.n_hops
    c = G[:, 0, 1:]
    inter = G[:, 1:, 1:]
    if config.adaptive and not config.ideal_scheduling:
        gS = _thr(config, phase_rates(config, 0).R_S)
        ES = G >= gS
        reach = np.broadcast_to(np.eye(n + 1, dtype=bool), G.shape).copy()
        for _ in range(config.sched_hops or hops):
            reach |= np.matmul(reach.astype(np.float32), ES.astype(np.float32)) > 0
        sched = reach.all(axis=1)
    else:
        sched = np.ones((B, n + 1), dtype=bool)
    sc, sn = sched[:, 0], sched[:, 1:]
    if trace is not None and config.adaptive:
        trace.append(f"S phases rate={phase_rates(config, 0).R_S if not config.ideal_scheduling else 'ideal'} "
                     f"schedule holders={_fmt(sched[0])}")
    out = {}
    if "D" in sides:
        A = c >= _thr(config, phase_rates(config, 0, strict=False).R_D1)
        hop = np.where(A, 1, 0)
        if trace is not None:
            trace.append(f"D1 tx={{C}} rate={phase_rates(config, 0, strict=False).R_D1:.6g} new={_fmt(A[0])}")
        if hops >= 2:
            a = A.sum(1)
            r = phase_rates(config, a, strict=False)
            g2 = np.broadcast_to(_thr(config, r.R_D2), (B,))[:, None]
            tx = A & sn
            relay = (tx[:, :, None] & (inter >= g2[:, :, None])).any(1)
            ok2 = ~A & (((c >= g2) & sc[:, None]) | relay)
            hop = np.where(ok2, 2, hop)
            if trace is not None:
                trace.append(f"D2 tx=C+{_fmt(tx[0])} rate={np.broadcast_to(r.R_D2, (B,))[0]:.6g} new={_fmt(ok2[0])}")
            if hops == 3:
                g3 = np.broadcast_to(_thr(config, r.R_D3), (B,))[:, None]
                tx = (A | ok2) & sn
                relay = (tx[:, :, None] & (inter >= g3[:, :, None])).any(1)
                ok3 = (hop == 0) & (((c >= g3) & sc[:, None]) | relay)
                hop = np.where(ok3, 3, hop)
                if trace is not None:
                    trace.append(f"D3 tx=C+{_fmt(tx[0])} rate={np.broadcast_to(r.R_D3, (B,))[0]:.6g} new={_fmt(ok3[0])}")
        out["D"] = hop
    if "U" in sides:
        A = c >= _thr(config, phase_rates(config, 0, strict=False).R_U1)
        hop = np.where(A, 1, 0)
        if trace is not None:
            trace.append(f"U1 tx=each node rate={phase_rates(config, 0, strict=False).R_U1:.6g} new={_fmt(A[0])}")
        if hops >= 2:
            a = A.sum(1)
            r = phase_rates(config, a, strict=False)
            g1 = _thr(config, phase_rates(config, 0, strict=False).R_U1)
            eye = np.eye(n, dtype=bool)
            H1 = (inter >= g1) | eye  # H1[i, j]: j decoded i's packet in phase I
            H1 &= sn[:, None, :]     # only schedule holders retransmit
            g2 = np.broadcast_to(_thr(config, r.R_U2), (B,))[:, None]
            ok2 = ~A & (H1 & (c >= g2)[:, None, :]).any(2)
            hop = np.where(ok2, 2, hop)
            if trace is not None:
                trace.append(f"U2 holders/node={[_fmt(h) for h in H1[0]]} rate={np.broadcast_to(r.R_U2, (B,))[0]:.6g} new={_fmt(ok2[0])}")
            if hops == 3:
                E2 = (inter >= g2[:, :, None]) & sn[:, None, :]
                H2 = H1 | (np.matmul(H1.astype(np.float32), E2.astype(np.float32)) > 0)
                g3 = np.broadcast_to(_thr(config, r.R_U3), (B,))[:, None]
                ok3 = (hop == 0) & (H2 & (c >= g3)[:, None, :]).any(2)
                hop = np.where(ok3, 3, hop)
                if trace is not None:
                    trace.append(f"U3 holders/node={[_fmt(h) for h in H2[0]]} rate={np.broadcast_to(r.R_U3, (B,))[0]:.6g} new={_fmt(ok3[0])}")
        out["U"] = hop
    return CycleOutcome(out.get("D"), out.get("U"), sched)


def stream_pairs(config):
    """(source, subscribers, relay pool) for every stream of a topology.

    Star: stream i < n is the downlink of node i+1, stream n+i its uplink.
    Generic: stream g is sourced at node g mod n and subscribed by the next
    d nodes cyclically.  The pool lists designated relays for the
    non-simultaneous and duty-cycled schemes.
    """
    top = config.topology
    N = top.total_nodes
    pairs = []
    if top.kind == "star":
        n = top.n_nodes
        pairs = [(0, (i,)) for i in range(1, n + 1)] + [(i, (0,)) for i in range(1, n + 1)]
    else:
        for g in range(top.n_streams):
            src = g % N
            pairs.append((src, tuple((src + k) % N for k in range(1, top.avg_subscribers + 1))))
    out = []
    for src, subs in pairs:
        others = [(subs[-1] + k) % N for k in range(1, N)]
        others = [v for v in others if v != src and v not in subs]
        out.append((src, subs, others))
    return out


def _baseline(config, G, rng=None):
    """Generic topologies and the baseline schemes: one column per
    (stream, subscriber) pair."""
    B, N = G.shape[0], G.shape[1]
    proto = config.protocol
    R = generic_rate(config)
    pairs = stream_pairs(config)
    cols = []
    if proto == "freq_hop":
        k = config.subchannels
        gam = _thr(config, k * R)
        for src, subs, _ in pairs:
            for dst in subs:
                ok = G[:, src, dst] >= gam
                if k > 1:
                    extra = rng.standard_exponential((B, k - 1))
                    ok = ok | (extra >= gam).any(1)
                cols.append(np.where(ok, 1, 0))
        return CycleOutcome(None, None, None, np.stack(cols, 1))
    E = G >= _thr(config, R)
    if proto in ("one_hop", "fixed_2hop", "fixed_3hop"):
        hops = config.n_hops
        for src, subs, _ in pairs:
            hold = np.zeros((B, N), dtype=bool)
            hold[:, src] = True
            hop = np.zeros((B, len(subs)), dtype=int)
            for h in range(1, hops + 1):
                new = (hold[:, :, None] & E[:, :, :]).any(1) & ~hold
                for k, dst in enumerate(subs):
                    hop[:, k] = np.where((hop[:, k] == 0) & new[:, dst], h, hop[:, k])
                hold |= new
            cols.extend(hop.T)
        return CycleOutcome(None, None, None, np.stack(cols, 1))
    if proto == "nonsim_relay":
        r, hops = config.relays, config.hops
    else:
        r, hops = duty_relays(N, config.duty_pct), 2
    for src, subs, others in pairs:
        pool = np.array(others[:r], dtype=int)
        if proto == "duty_cycled":
            # subscribers are awake for their stream and relay what they hold
            pool = np.concatenate([pool, np.array(subs, dtype=int)])
        for dst in subs:
            hop = np.where(E[:, src, dst], 1, 0)
            relays = pool[pool != dst]
            if len(relays):
                held = E[:, src][:, relays]
                ok2 = (held & E[:, relays, dst]).any(1)
                hop = np.where((hop == 0) & ok2, 2, hop)
                if hops == 3:
                    sub = E[:, relays][:, :, relays]
                    held2 = held | (held[:, :, None] & sub).any(1)
                    ok3 = (held2 & E[:, relays, dst]).any(1)
                    hop = np.where((hop == 0) & ok3, 3, hop)
            cols.append(hop)
    return CycleOutcome(None, None, None, np.stack(cols, 1))


def simulate_batch(config: ScenarioConfig, G, rng=None, trace=None) -> CycleOutcome:
    if config.topology.kind == "star" and config.protocol in STAR_PROTOCOLS:
        return _star(config, G, trace=trace)
    return _baseline(config, G, rng)


def simulate_cycle(config: ScenarioConfig, fades, trace=None) -> CycleOutcome:
    """One cycle for a single (N, N) fade matrix.  ``trace``, if a list,
    receives one line per phase (star protocols)."""
    G = np.asarray(fades, dtype=float)[None]
    if config.protocol == "freq_hop" and config.subchannels > 1:
        raise ValueError("freq_hop needs extra sub-channel fades; use simulate_baseline")
    return simulate_batch(config, G, trace=trace)


def simulate_baseline(config: ScenarioConfig, trials=1, seed=0) -> CycleOutcome:
    """Baseline schemes (non-simultaneous relaying, frequency hopping, duty
    cycling) under the same fade discipline; returns the outcome of the first
    block of trials."""
    rng = block_rng(seed, 0)
    G = draw_fades(rng, trials, n_devices(config))
    return _baseline(config, G, rng)


def _block_counts(config, seed, b, size):
    rng = block_rng(seed, b)
    G = draw_fades(rng, size, n_devices(config))
    out = simulate_batch(config, G, rng)
    if out.pair_hop is not None:
        cyc = out.cycle_failed
        return {"cycle": int(cyc.sum())}
    d, u = out.downlink_failed, out.uplink_failed
    no_sched = ~out.scheduling_disseminated.all(1)
    return {"downlink": int(d.sum()), "uplink": int(u.sum()),
            "scheduling": int(no_sched.sum()), "cycle": int((d | u).sum())}


def estimate_components(config: ScenarioConfig, trials: int, seed: int = 0, workers: int = 1):
    """Failure counts per component; returns {name: FailureProbability}."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    nb = -(-trials // BLOCK)
    sizes = [min(BLOCK, trials - b * BLOCK) for b in range(nb)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda b: _block_counts(config, seed, b, sizes[b]), range(nb)))
    else:
        parts = [_block_counts(config, seed, b, sizes[b]) for b in range(nb)]
    out = {}
    for k in parts[0]:
        f = sum(p[k] for p in parts)
        out[k] = FailureProbability.monte_carlo(f, trials, wilson_halfwidth(f, trials))
    return out


def estimate_failure(config: ScenarioConfig, trials: int, seed: int = 0, workers: int = 1,
                     component: str = "cycle") -> FailureProbability:
    return estimate_components(config, trials, seed, workers)[component]


# ------------------------------------------------------------ exhaustive oracle

def _intervals(thresholds, lo=0.0, hi=math.inf):
    cuts = sorted({t for t in thresholds if lo < t < hi and math.isfinite(t)})
    edges = [lo] + cuts + [hi]
    reps, w = [], []
    for x0, x1 in zip(edges[:-1], edges[1:]):
        if x1 <= x0:
            continue
        prob = math.exp(-x0) * -math.expm1(-(x1 - x0)) if math.isfinite(x1) else math.exp(-x0)
        if math.isfinite(x1):
            rep = 0.5 * (x0 + x1)
        else:
            rep = x0 + 1.0
        reps.append(rep)
        w.append(prob)
    return np.array(reps), np.array(w)


def _star_thresholds(config, side):
    n = config.n
    a = np.arange(n + 1)
    r = phase_rates(config, a, strict=False)
    g1 = float(_thr(config, r.R_D1 if side == "D" else r.R_U1))
    rest = []
    for k in (2, 3):
        R = getattr(r, f"R_{side}{k}")
        if R is not None:
            rest.append(np.broadcast_to(_thr(config, R), (n + 1,)))
    return g1, rest


def brute_force_star(config: ScenarioConfig, side: str, chunk: int = 1 << 16) -> float:
    """Exact failure probability of one side ('D' or 'U') of a small star
    (n <= 4, ideal scheduling) by enumerating every joint quantisation of
    the link gains against the rates in use."""
    if config.adaptive and not config.ideal_scheduling:
        raise ValueError("enumeration needs ideal scheduling")
    n = config.n
    N = n + 1
    g1, rest = _star_thresholds(config, side)
    iu = np.triu_indices(N, 1)
    ctrl = [k for k in range(len(iu[0])) if iu[0][k] == 0]
    inner = [k for k in range(len(iu[0])) if iu[0][k] != 0]
    total = []
    for pattern in itertools.product((True, False), repeat=n):
        a = sum(pattern)
        th = [g1] + [float(t[a]) for t in rest]
        per_link = [None] * len(iu[0])
        for k, good in zip(ctrl, pattern):
            per_link[k] = _intervals(th, g1, math.inf) if good else _intervals(th, 0.0, g1)
        for k in inner:
            per_link[k] = _intervals(th)
        if any(len(w) == 0 for _, w in per_link):
            continue
        sizes = [len(w) for _, w in per_link]
        idx = np.indices(sizes).reshape(len(sizes), -1).T
        for s0 in range(0, len(idx), chunk):
            block = idx[s0:s0 + chunk]
            vals = np.stack([per_link[k][0][block[:, k]] for k in range(len(sizes))], 1)
            wts = np.prod(np.stack([per_link[k][1][block[:, k]] for k in range(len(sizes))], 1), 1)
            G = np.zeros((len(block), N, N))
            G[:, iu[0], iu[1]] = vals
            G[:, iu[1], iu[0]] = vals
            out = _star(config, G, sides=(side,))
            hop = out.downlink_hop if side == "D" else out.uplink_hop
            failed = (hop == 0).any(1)
            total.append(wts[failed])
    return math.fsum(np.concatenate(total).tolist()) if total else 0.0


def brute_force_generic(config: ScenarioConfig) -> float:
    """Exact cycle failure of a small generic topology with a single uniform
    rate, by enumerating all 2^(links) good/bad patterns."""
    N = n_devices(config)
    iu = np.triu_indices(N, 1)
    L = len(iu[0])
    gam = float(_thr(config, generic_rate(config)))
    p = -math.expm1(-gam)
    states = np.array(list(itertools.product((True, False), repeat=L)))
    vals = np.where(states, gam + 1.0, gam / 2.0)
    wts = np.prod(np.where(states, 1.0 - p, p), 1)
    G = np.zeros((len(states), N, N))
    G[:, iu[0], iu[1]] = vals
    G[:, iu[1], iu[0]] = vals
    out = _baseline(config, G)
    return math.fsum(wts[out.cycle_failed].tolist())
