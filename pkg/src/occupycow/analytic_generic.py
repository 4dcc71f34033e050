"""Union bounds for generic information topologies and the baseline schemes
(non-simultaneous relaying, frequency-hopping repetition, duty cycling).

Per-pair failure terms are accumulated as sums of positive terms so that
1 - q_s is never formed by cancellation.
"""
from __future__ import annotations

import math

import numpy as np

from .fading import at_least_one_fails, binom_pmf, ksum, link_failure_prob, outage_prob
from .scenario import ScenarioConfig, db_to_linear, linear_to_db


class InfeasibleDuty(ValueError):
    pass


def _pf(p):
    return float(getattr(p, "p_fail", p))


def relay_fail_2hop(N, p):
    """P(no two-hop path | no direct link) with N candidate relays:
    sum_j B(N, j, p) p^j."""
    j = np.arange(N + 1)
    return ksum(binom_pmf(N, j, p) * np.power(p, j))


def relay_fail_3hop(N, p):
    """Same with a second relay round: the destination misses the first-hop
    relays I (p^i) and every node they reach (J)."""
    i = np.arange(N + 1)[:, None]
    j = np.arange(N + 1)[None, :]
    pi = np.power(p, i)
    w = binom_pmf(N, i, p) * pi * binom_pmf(N - i, j, pi) * np.power(p, j)
    return ksum(np.where(j <= N - i, w, 0.0))


def union_bound_2hop(n, s, d, p):
    p = _pf(p)
    if n < 2:
        raise ValueError("need n >= 2")
    return min(1.0, s * d * p * relay_fail_2hop(n - 2, p))


def union_bound_3hop(n, s, d, p):
    p = _pf(p)
    if n < 2:
        raise ValueError("need n >= 2")
    return min(1.0, s * d * p * relay_fail_3hop(n - 2, p))


def nonsim_rate(s, m, T, k, r):
    return s * m * (1 + (k - 1) * r) / T


def nonsim_relay_failure(n, s, d, m, T, k, r, channel):
    """Returns (bound, link rate).  Relays take turns, r per stream."""
    if not (0 <= r <= max(n - 2, 0)):
        raise ValueError("need 0 <= r <= n - 2")
    if k not in (2, 3):
        raise ValueError("k must be 2 or 3")
    R = nonsim_rate(s, m, T, k, r)
    p = link_failure_prob(R, channel).p_fail
    inner = relay_fail_3hop(r, p) if k == 3 else relay_fail_2hop(r, p)
    return min(1.0, s * d * p * inner), R


def freq_hop_failure(s, k_fh, base_rate, channel):
    """1 - (1 - p_sc^k)^s, p_sc taken at spectral efficiency k R / W."""
    if k_fh < 1:
        raise ValueError("k_fh >= 1")
    p_sc = link_failure_prob(k_fh * base_rate, channel).p_fail
    return at_least_one_fails(s, p_sc ** k_fh)


def duty_relays(n, x):
    if not (0 <= x <= 100):
        raise ValueError("duty percentage must be in [0, 100]")
    return math.ceil(round(x * (n - 2) / 100.0, 9))


def duty_cycle_failure(n, s, d, p, x):
    p = _pf(p)
    r = duty_relays(n, x)
    return min(1.0, s * d * p * relay_fail_2hop(r, p))


# ---------------------------------------------------------------- config level

def _scheme_dims(config):
    top = config.topology
    return top.total_nodes, top.s, top.d


def generic_rate(config):
    """Uniform link rate of a baseline / generic scheme (bits/s)."""
    top = config.topology
    s, m, T = top.s, config.message_bits, config.cycle_time_s
    p = config.protocol
    if p == "one_hop" or p == "freq_hop":
        return s * m / T
    if p == "nonsim_relay":
        return s * m * (1 + (config.hops - 1) * config.relays) / T
    if p == "duty_cycled":
        return s * m * 2 / T
    if p in ("fixed_2hop", "fixed_3hop"):
        return s * m * config.n_hops / T
    raise ValueError(f"no uniform-rate model for {p}")


def generic_failure(config: ScenarioConfig) -> float:
    """Union bound (or exact expression for one-shot / frequency hopping)
    for the config's scheme, using the scheme's uniform link rate."""
    N, s, d = _scheme_dims(config)
    ch = config.channel
    proto = config.protocol
    R = generic_rate(config)
    if proto == "freq_hop":
        return freq_hop_failure(s * d, config.subchannels, R, ch)
    if proto == "nonsim_relay":
        return nonsim_relay_failure(N, s, d, config.message_bits, config.cycle_time_s,
                                    config.hops, config.relays, ch)[0]
    p = outage_prob(R, ch.snr_linear, ch.bandwidth_hz)
    if proto == "one_hop":
        return min(1.0, s * d * p)
    if proto == "duty_cycled":
        return duty_cycle_failure(N, s, d, p, config.duty_pct)
    if proto == "fixed_2hop":
        return union_bound_2hop(N, s, d, p)
    if proto == "fixed_3hop":
        return union_bound_3hop(N, s, d, p)
    raise ValueError(f"no generic bound for {proto}")


def harq_failure(config: ScenarioConfig) -> float:
    """Hypothetical reference: every message alone on the whole cycle and
    band (rate m/T), no relaying."""
    _, s, d = _scheme_dims(config)
    p = outage_prob(config.message_bits / config.cycle_time_s,
                    config.channel.snr_linear, config.channel.bandwidth_hz)
    return at_least_one_fails(s * d, p)


def power_curve(config: ScenarioConfig, duty_grid, background_power_db, spec=None):
    """Rows (duty_pct, awake_tx_snr_db, avg_tx_power_db, avg_total_power_db).

    Power is in units of received SNR; a background of -inf dB means none.
    """
    from .optimizer import InfeasibleBracket, SnrSearchSpec, min_snr_fn
    spec = spec or SnrSearchSpec()
    N, s, d = _scheme_dims(config)
    R = s * config.message_bits * 2 / config.cycle_time_s
    W = config.channel.bandwidth_hz
    bg = 0.0 if background_power_db == -math.inf else float(db_to_linear(background_power_db))
    rows = []
    for x in duty_grid:
        if not (0 < x <= 100):
            raise ValueError("duty grid must lie in (0, 100]")

        def fn(snr_lin, x=x):
            return duty_cycle_failure(N, s, d, outage_prob(R, snr_lin, W), x)
        try:
            snr_db = min_snr_fn(fn, spec)
        except InfeasibleBracket as exc:
            raise InfeasibleDuty(f"duty {x}%: {exc}") from None
        awake = float(db_to_linear(snr_db))
        frac = x / 100.0
        rows.append((float(x), snr_db, float(linear_to_db(awake * frac)),
                     float(linear_to_db(frac * (awake + bg)))))
    return rows
