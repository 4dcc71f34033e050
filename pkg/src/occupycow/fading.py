"""Rayleigh outage probabilities and the binomial combinators used by the
closed-form engines.

A link with unit-mean exponential power gain g supports rate R over
bandwidth W at nominal SNR iff R <= W log2(1 + g SNR).  The failure
probability is therefore 1 - exp(-(2^(R/W) - 1)/SNR).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

LN2 = math.log(2.0)


class DegenerateConditioning(ValueError):
    """The conditioning event of a conditional probability has probability 0."""


@dataclass(frozen=True)
class LinkProb:
    p_fail: float
    log_p_fail: float
    log1m_p_fail: float

    def __float__(self):
        return self.p_fail


def outage_threshold(rate, snr_linear, bandwidth_hz):
    """Gain threshold (2^(R/W) - 1)/SNR; a link works iff its gain is >= this."""
    with np.errstate(over="ignore"):
        return np.expm1(np.asarray(rate, dtype=float) * (LN2 / bandwidth_hz)) / snr_linear


def outage_prob(rate, snr_linear, bandwidth_hz):
    """Vectorised link failure probability.  Infinite rates give 1."""
    x = outage_threshold(rate, snr_linear, bandwidth_hz)
    with np.errstate(over="ignore", invalid="ignore"):
        p = -np.expm1(-x)
    p = np.where(np.isnan(p), 1.0, p)
    if np.ndim(p) == 0:
        return float(p)
    return p


def link_failure_prob(rate: float, channel) -> LinkProb:
    """Failure probability of one link at ``rate`` (bits/s) on ``channel``."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    x = float(outage_threshold(rate, channel.snr_linear, channel.bandwidth_hz))
    if not math.isfinite(x):
        return LinkProb(1.0, 0.0, -math.inf)
    p = -math.expm1(-x)
    log_p = math.log(p) if p > 0 else -math.inf
    return LinkProb(p, log_p, -x)


def _p(v):
    return v.p_fail if isinstance(v, LinkProb) else v


def cond_fail_given_fail(p_lo, p_hi):
    """P(C < R_hi | C < R_lo) = min(p_hi/p_lo, 1).

    When p_lo = 0 the conditioning event is impossible; p_hi is returned so
    that callers never see NaN (every such term carries zero weight).
    """
    p_lo, p_hi = _p(p_lo), _p(p_hi)
    if np.ndim(p_lo) == 0 and np.ndim(p_hi) == 0:
        if p_lo <= 0.0:
            return float(p_hi)
        return min(p_hi / p_lo, 1.0)
    p_lo, p_hi = np.broadcast_arrays(np.asarray(p_lo, float), np.asarray(p_hi, float))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.minimum(p_hi / p_lo, 1.0)
    return np.where(p_lo > 0, r, p_hi)


def cond_fail_given_success(p_lo, p_hi):
    """P(C < R_hi | C >= R_lo) = clamp((p_hi - p_lo)/(1 - p_lo))."""
    p_lo, p_hi = _p(p_lo), _p(p_hi)
    if np.any(np.asarray(p_lo) >= 1.0):
        raise DegenerateConditioning("p_lo = 1: no link survives the lower rate")
    r = (np.asarray(p_hi, float) - p_lo) / (1.0 - np.asarray(p_lo, float))
    r = np.clip(r, 0.0, 1.0)
    return float(r) if r.ndim == 0 else r


def cond_fail_between(p1, p2, p3):
    """m_312 = P(C < R3 | R1 <= C < R2) = clamp((p3 - p1)/(p2 - p1))."""
    p1, p2, p3 = _p(p1), _p(p2), _p(p3)
    if np.any(np.asarray(p2) <= np.asarray(p1)):
        raise DegenerateConditioning("p2 <= p1: empty capacity window")
    r = np.clip((np.asarray(p3, float) - p1) / (np.asarray(p2, float) - p1), 0.0, 1.0)
    return float(r) if r.ndim == 0 else r


def log_binom_pmf(n, m, p_fail):
    """log B(n, m, p); -inf outside 0 <= m <= n."""
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    p = np.asarray(_p(p_fail), dtype=float)
    valid = (m >= 0) & (m <= n)
    nn = np.where(valid, n, 0.0)
    mm = np.where(valid, m, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (gammaln(nn + 1) - gammaln(mm + 1) - gammaln(nn - mm + 1)
               + xlog1py(mm, -p) + xlogy(nn - mm, p))
    out = np.where(valid, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def binom_pmf(n, m, p_fail):
    """B(n, m, p) = C(n, m) (1-p)^m p^(n-m); 1-p is the per-trial success."""
    out = np.exp(log_binom_pmf(n, m, p_fail))
    return float(out) if np.ndim(out) == 0 else out


def at_least_one_fails(n, p_fail):
    """F(n, p) = 1 - (1-p)^n."""
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -np.expm1(xlog1py(np.asarray(n, float), -np.asarray(_p(p_fail), float)))
    return float(out) if np.ndim(out) == 0 else out


def ratio_term(p_i, f, p_j, g):
    """s_ij[f, g] = (1 - p_i^f)/(1 - p_j^g), clamped to [0, 1]."""
    den = -np.expm1(xlogy(np.asarray(g, float), np.asarray(_p(p_j), float)))
    if np.any(den <= 0):
        raise DegenerateConditioning("p_j^g = 1")
    num = -np.expm1(xlogy(np.asarray(f, float), np.asarray(_p(p_i), float)))
    r = np.clip(num / den, 0.0, 1.0)
    return float(r) if r.ndim == 0 else r


def ksum(values) -> float:
    """Compensated sum of an array of probabilities."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())
