"""Closed-form cycle failure probabilities for the star information topology.

All engines take link failure probabilities.  Adaptive retransmission
probabilities are given per first-phase success count ``a`` as arrays of
length n (index a = 0..n-1) or as callables of ``a``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fading import (at_least_one_fails, binom_pmf, cond_fail_between, cond_fail_given_fail,
                     cond_fail_given_success, ksum, outage_prob, ratio_term)
from .scenario import STAR_PROTOCOLS, ScenarioConfig, phase_rates


class CaseDispatchGap(RuntimeError):
    pass


@dataclass(frozen=True)
class StarBreakdown:
    p_downlink: float
    p_uplink: float
    p_scheduling: float
    p_cycle_bound: float


def _per_a(n, v):
    if callable(v):
        return np.array([float(v(a)) for a in range(n)])
    v = np.asarray(getattr(v, "p_fail", v), dtype=float)
    if v.ndim == 0:
        return np.full(n, float(v))
    v = np.array([getattr(x, "p_fail", x) for x in v], dtype=float)
    if len(v) < n:
        raise ValueError("need one probability per a = 0..n-1")
    return v[:n]


def _pf(p):
    return float(getattr(p, "p_fail", p))


def one_hop_downlink(n, p_D):
    return at_least_one_fails(n, _pf(p_D))


def one_hop_uplink(n, p_U):
    return at_least_one_fails(n, _pf(p_U))


def two_hop_adaptive_downlink(n, p1, p2_of_a):
    p1 = _pf(p1)
    p2 = _per_a(n, p2_of_a)
    a = np.arange(n)
    pc = cond_fail_given_fail(p1, p2)
    with np.errstate(invalid="ignore"):
        x = np.power(p2, a) * pc
    return ksum(binom_pmf(n, a, p1) * at_least_one_fails(n - a, x))


def two_hop_fixed_downlink(n, p1, p2):
    return two_hop_adaptive_downlink(n, p1, _pf(p2))


def two_hop_uplink(n, p1, p2_of_a, case1=None):
    """Two-hop uplink.  ``case1[a]`` is True when R_U2(a) >= R_U1; by default
    the dispatch is read off the probabilities (p2 >= p1)."""
    p1 = _pf(p1)
    p2 = _per_a(n, p2_of_a)
    if case1 is None:
        case1 = p2 >= p1
    case1 = np.broadcast_to(np.asarray(case1, bool), (n,))
    terms = []
    for a in range(n):
        M = n - a
        wa = binom_pmf(n, a, p1)
        if wa == 0.0:
            continue
        if case1[a]:
            q = cond_fail_given_success(p1, p2[a]) if p1 < 1 else 0.0
            a2 = np.arange(a + 1)
            terms.append(wa * binom_pmf(a, a2, q) * at_least_one_fails(M, np.power(p1, a2)))
        else:
            qt = 1.0 - cond_fail_given_fail(p1, p2[a])
            b2 = np.arange(M)
            terms.append(wa * binom_pmf(M, b2, 1.0 - qt)
                         * at_least_one_fails(M - b2, np.power(p1, a + b2)))
    return ksum(np.concatenate(terms)) if terms else 0.0


def three_hop_downlink(n, p1, p2_of_a, p3_of_a):
    p1 = _pf(p1)
    p2 = _per_a(n, p2_of_a)
    p3 = _per_a(n, p3_of_a)
    a = np.arange(n)[:, None]
    b = np.arange(n)[None, :]
    M = n - a
    P2, P3 = p2[:, None], p3[:, None]
    q21 = cond_fail_given_fail(p1, P2)
    q32 = cond_fail_given_fail(P2, P3)
    q321 = cond_fail_given_fail(np.minimum(p1, P2), P3)
    x = np.power(P2, a) * q21
    y = np.power(P3, b) * np.power(q32, a) * q321
    rest = np.maximum(M - b, 0)
    w = binom_pmf(n, a, p1) * binom_pmf(M, b, x) * at_least_one_fails(rest, y)
    w = np.where(b < M, w, 0.0)
    return ksum(w)


def _uplink3_given_a(n, a, p1, p2, p3):
    """P(uplink failure | A = a) for the three-hop uplink, exact.

    A node i outside A succeeds iff its own controller link works at
    min(R2, R3), or it reaches (at R2) a node whose controller link works at
    R3, or it reaches (at R1) a node j that is itself "relay capable" in the
    same sense.  Conditioning on the set G3 of nodes with a working R3
    controller link makes the remaining events independent across nodes.
    """
    N = n - a
    pm = min(p2, p3)
    # controller-link category probabilities, conditioned on phase-I outcome
    uA3 = 1.0 - cond_fail_given_success(p1, p3) if p1 < 1 else 0.0
    uAm = 1.0 - cond_fail_given_success(p1, pm) if p1 < 1 else 0.0
    uN3 = 1.0 - cond_fail_given_fail(p1, p3) if p1 > 0 else 0.0
    uNm = 1.0 - cond_fail_given_fail(p1, pm) if p1 > 0 else 0.0
    gA = (uAm - uA3) / (1.0 - uA3) if uA3 < 1 else 0.0
    gN = (uNm - uN3) / (1.0 - uN3) if uN3 < 1 else 0.0

    g3A = np.arange(a + 1)[:, None, None, None]
    g3N = np.arange(N + 1)[None, :, None, None]
    cA = np.arange(a + 1)[None, None, :, None]
    e = np.arange(N + 1)[None, None, None, :]
    g3 = g3A + g3N
    rho = 1.0 - np.power(p2, g3)
    piA = gA + (1.0 - gA) * rho
    piN = gN + (1.0 - gN) * rho
    nN = N - g3N
    theta = np.power(cond_fail_given_fail(p2, p1), g3)
    w = (binom_pmf(a, g3A, 1.0 - uA3) * binom_pmf(N, g3N, 1.0 - uN3)
         * binom_pmf(a - g3A, cA, 1.0 - piA) * binom_pmf(nN, e, piN))
    relays = np.maximum(cA + nN - e, 0)  # out-of-range cells are masked below
    f = at_least_one_fails(e, theta * np.power(p1, relays))
    w = np.where((cA <= a - g3A) & (e <= nN), w * f, 0.0)
    return w


def three_hop_uplink(n, p1, p2_of_a, p3_of_a):
    """Exact three-hop uplink failure (see ``_uplink3_given_a``)."""
    p1 = _pf(p1)
    p2 = _per_a(n, p2_of_a)
    p3 = _per_a(n, p3_of_a)
    terms = []
    for a in range(n):
        wa = binom_pmf(n, a, p1)
        if wa == 0.0:
            continue
        # all terms are >= 0, so numpy's pairwise sum is accurate here
        terms.append(wa * float(np.sum(_uplink3_given_a(n, a, p1, p2[a], p3[a]))))
    return ksum(terms) if terms else 0.0


def uplink3_case(R1, R2, R3):
    """Rate-ordering case (1..6) of the six-case three-hop uplink sum."""
    if R1 >= R2 > R3:
        return 1
    if R1 > R3 >= R2:
        return 2
    if R3 >= R1 > R2:
        return 3
    if R3 > R2 >= R1:
        return 4
    if R2 >= R3 > R1:
        return 5
    if R2 > R1 >= R3:
        return 6
    if R1 == R2 == R3:
        return 1
    raise CaseDispatchGap(f"no ordering matches R=({R1}, {R2}, {R3})")


def _B(n, m, p):
    if m < 0 or m > n:
        return 0.0
    return binom_pmf(n, m, p)


def _F(n, p):
    return at_least_one_fails(n, p) if n > 0 else 0.0


def _s(pi, f, pj, g):
    # only ever multiplies B(0, 0, .) when degenerate, so any value is fine
    try:
        return ratio_term(pi, f, pj, g)
    except ValueError:
        return 1.0


def _casewise_given_a(case, n, a, p1, p2, p3):
    q21 = cond_fail_given_fail(p1, p2)
    q31 = cond_fail_given_fail(p1, p3)
    q32 = cond_fail_given_fail(p2, p3)
    if p1 < 1:
        r21 = cond_fail_given_success(p1, p2)
        r31 = cond_fail_given_success(p1, p3)
    else:
        r21 = r31 = 0.0
    r32 = cond_fail_given_success(p2, p3) if p2 < 1 else 0.0
    m312 = cond_fail_between(p1, p2, p3) if p2 > p1 else 0.0
    tot = []
    M = n - a
    rng = range
    if case == 1:
        for b2 in rng(M):
            for b1 in rng(M - b2):
                b = b1 + b2
                for c3 in rng(M - b):
                    for c2 in rng(M - b - c3):
                        tot.append(_F(M - b - c2 - c3, p1 ** (b1 + c2))
                                   * _B(M - b - c3, c2, q21 ** (a + b2 + c3))
                                   * _B(M - b, c3, q32) * _B(M - b2, b1, p1 ** (a + b2))
                                   * _B(M, b2, q21))
    elif case == 2:
        for b2 in rng(M):
            for b1 in rng(M - b2):
                b = b1 + b2
                for hb2 in rng(b2 + 1):
                    for hb1 in rng(b1 + 1):
                        for c2 in rng(M - b):
                            tot.append(_F(M - b - c2, p1 ** (hb1 + c2))
                                       * _B(M - b, c2, q21 ** (a + hb2))
                                       * _B(M - b2, b1, p1 ** (a + b2))
                                       * _B(b1, hb1, _s(p2, a + hb2, p2, a + b2))
                                       * _B(b2, hb2, r32) * _B(M, b2, q21))
    elif case == 3:
        for a3 in rng(a + 1):
            for b2 in rng(M):
                for b1 in rng(M - b2):
                    b = b1 + b2
                    for hb1 in rng(b1 + 1):
                        for c2 in rng(M - b):
                            tot.append(_F(M - b - c2, p1 ** (hb1 + c2))
                                       * _B(M - b, c2, q21 ** a3)
                                       * _B(b1, hb1, _s(p2, a3, p2, a + b2))
                                       * _B(M - b2, b1, p1 ** (a + b2))
                                       * _B(a, a3, r31) * _B(M, b2, q21))
    elif case == 4:
        for a2 in rng(a + 1):
            a1 = a - a2
            for a3 in rng(a2 + 1):
                for ha1 in rng(a1 + 1):
                    for b1 in rng(M):
                        for hb1 in rng(b1 + 1):
                            tot.append(_F(M - b1, p1 ** (ha1 + hb1))
                                       * _B(a1, ha1, p2 ** a3)
                                       * _B(b1, hb1, _s(p2, a3, p1, a2))
                                       * _B(M, b1, p1 ** a2) * _B(a2, a3, r32) * _B(a, a2, r21))
    elif case == 5:
        for a2 in rng(a + 1):
            for ta1 in rng(a - a2 + 1):
                for ha1 in rng(a - a2 - ta1 + 1):
                    for b1 in rng(M):
                        for hb1 in rng(b1 + 1):
                            tot.append(_F(M - b1, p1 ** (ha1 + hb1))
                                       * _B(a - ta1 - a2, ha1, p2 ** (ta1 + a2))
                                       * _B(b1, hb1, _s(p2, a2, p1, a2))
                                       * _B(M, b1, p1 ** a2) * _B(a - a2, ta1, m312)
                                       * _B(a, a2, r21))
    elif case == 6:
        for a2 in rng(a + 1):
            a1 = a - a2
            for b1 in rng(M):
                b = b1
                for hb1 in rng(b1 + 1):
                    for c3 in rng(M - b1):
                        for c2 in rng(M - b1 - c3):
                            for hc2 in rng(c2 + 1):
                                tot.append(_F(M - b - c2 - c3, p1 ** (hb1 + hc2))
                                           * _B(c2, hc2, _s(p2, a + c3, p1, a + c3))
                                           * _B(b1, hb1, _s(p2, a2, p1, a2))
                                           * _B(M - b1, c3, q31)
                                           * _B(M - b - c3, c2, p1 ** (a1 + c3))
                                           * _B(M, b1, p1 ** a2) * _B(a, a2, r21))
    return ksum(tot) if tot else 0.0


def three_hop_uplink_casewise(n, p1, p2_of_a, p3_of_a, rates=None):
    """The six-case three-hop uplink sum evaluated term by term as published.

    ``rates`` = (R1, R2_of_a, R3_of_a) drives the case dispatch; without it
    the dispatch uses the probabilities (same ordering as the rates).
    This form is kept for comparison; it is not exact (see README).
    """
    p1 = _pf(p1)
    p2 = _per_a(n, p2_of_a)
    p3 = _per_a(n, p3_of_a)
    if rates is None:
        R1, R2, R3 = p1, p2, p3
    else:
        R1, R2, R3 = rates[0], _per_a(n, rates[1]), _per_a(n, rates[2])
    tot = []
    for a in range(n):
        wa = binom_pmf(n, a, p1)
        if wa == 0.0:
            continue
        case = uplink3_case(R1, R2[a], R3[a])
        tot.append(wa * _casewise_given_a(case, n, a, p1, p2[a], p3[a]))
    return ksum(tot) if tot else 0.0


# ---------------------------------------------------------------- config level

def _probs(config, rates):
    ch = config.channel
    return lambda r: outage_prob(r, ch.snr_linear, ch.bandwidth_hz)


def downlink_failure(config: ScenarioConfig) -> float:
    n = config.n
    hops = config.n_hops
    a = np.arange(n)
    r = phase_rates(config, a, strict=False)
    pr = _probs(config, r)
    p1 = pr(np.atleast_1d(r.R_D1))[0]
    if hops == 1:
        return one_hop_downlink(n, p1)
    p2 = np.broadcast_to(pr(r.R_D2), (n,))
    if hops == 2:
        return two_hop_adaptive_downlink(n, p1, p2)
    p3 = np.broadcast_to(pr(r.R_D3), (n,))
    return three_hop_downlink(n, p1, p2, p3)


def uplink_failure(config: ScenarioConfig, casewise=False) -> float:
    n = config.n
    hops = config.n_hops
    a = np.arange(n)
    r = phase_rates(config, a, strict=False)
    pr = _probs(config, r)
    p1 = pr(np.atleast_1d(r.R_U1))[0]
    if hops == 1:
        return one_hop_uplink(n, p1)
    R2 = np.broadcast_to(np.asarray(r.R_U2, float), (n,))
    p2 = pr(R2)
    if hops == 2:
        return two_hop_uplink(n, p1, p2, case1=R2 >= r.R_U1)
    R3 = np.broadcast_to(np.asarray(r.R_U3, float), (n,))
    p3 = pr(R3)
    if casewise:
        return three_hop_uplink_casewise(n, p1, p2, p3, rates=(r.R_U1, R2, R3))
    return three_hop_uplink(n, p1, p2, p3)


def scheduling_failure(config: ScenarioConfig) -> float:
    """Union bound on ACK dissemination: n+1 ACK packets, each wanted by the
    other n devices, relayed by the fixed schedule at R_S."""
    if not config.adaptive or config.ideal_scheduling:
        return 0.0
    from .analytic_generic import union_bound_2hop, union_bound_3hop
    n = config.n
    r = phase_rates(config, 0)
    p = outage_prob(r.R_S, config.channel.snr_linear, config.channel.bandwidth_hz)
    h = config.sched_hops or config.n_hops
    ub = union_bound_3hop if h == 3 else union_bound_2hop
    return ub(n + 1, n + 1, n, p)


def star_cycle_failure(config: ScenarioConfig) -> StarBreakdown:
    if config.topology.kind != "star" or config.protocol not in STAR_PROTOCOLS:
        raise ValueError("star_cycle_failure needs a star topology and an Occupy CoW protocol")
    pd = downlink_failure(config)
    pu = uplink_failure(config)
    ps = scheduling_failure(config)
    return StarBreakdown(pd, pu, ps, min(1.0, pd + pu + ps))
