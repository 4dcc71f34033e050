"""Configuration and result types shared by the engines, the simulator and
the optimizers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

PROTOCOLS = ("one_hop", "fixed_2hop", "adaptive_2hop", "fixed_3hop", "adaptive_3hop",
             "nonsim_relay", "freq_hop", "duty_cycled")
STAR_PROTOCOLS = PROTOCOLS[:5]

# protocol -> knobs it requires
_KNOBS = {
    "nonsim_relay": ("relays", "hops"),
    "freq_hop": ("subchannels",),
    "duty_cycled": ("duty_pct",),
}
_ALL_KNOBS = ("relays", "hops", "subchannels", "duty_pct")


class ConfigError(ValueError):
    def __init__(self, field_name, message=""):
        self.field = field_name
        self.violations = [self]
        super().__init__(f"{type(self).__name__}: {field_name}" + (f" ({message})" if message else ""))


class NonPositiveField(ConfigError):
    pass


class FractionSumMismatch(ConfigError):
    pass


class MissingProtocolKnob(ConfigError):
    pass


class UnexpectedProtocolKnob(ConfigError):
    pass


class InvalidField(ConfigError):
    pass


class ZeroPhaseTime(ValueError):
    pass


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0) if np.ndim(db) else 10.0 ** (db / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x) if np.ndim(x) else 10.0 * math.log10(x)


@dataclass(frozen=True)
class ChannelParams:
    snr_linear: float
    bandwidth_hz: float
    # dB value the SNR was built from, kept so it round-trips exactly
    source_db: float | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_db(cls, snr_db, bandwidth_hz):
        return cls(10.0 ** (snr_db / 10.0), bandwidth_hz, float(snr_db))

    @property
    def snr_db(self):
        if self.source_db is not None:
            return self.source_db
        return 10.0 * math.log10(self.snr_linear)


@dataclass(frozen=True)
class TopologySpec:
    """``n_nodes`` counts non-controller nodes for a star and all nodes for a
    generic topology."""
    n_nodes: int
    kind: str = "star"
    n_streams: int | None = None
    avg_subscribers: int = 1

    @property
    def s(self):
        return 2 * self.n_nodes if self.kind == "star" else self.n_streams

    @property
    def d(self):
        return 1 if self.kind == "star" else self.avg_subscribers

    @property
    def total_nodes(self):
        return self.n_nodes + 1 if self.kind == "star" else self.n_nodes


@dataclass(frozen=True)
class PhasePlan:
    f_D: tuple = (1.0, 0.0, 0.0)
    f_U: tuple = (1.0, 0.0, 0.0)
    f_S: float = 0.0
    downlink_budget_s: float | None = None
    uplink_budget_s: float | None = None

    @classmethod
    def even(cls, hops, f_S=0.0):
        fr = tuple([1.0 / hops] * hops + [0.0] * (3 - hops))
        return cls(fr, fr, f_S)


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologySpec
    channel: ChannelParams
    message_bits: float
    cycle_time_s: float
    protocol: str = "fixed_2hop"
    phase_plan: PhasePlan = field(default_factory=lambda: PhasePlan.even(2))
    relays: int | None = None
    hops: int | None = None
    subchannels: int | None = None
    duty_pct: float | None = None
    sched_overhead: bool = True
    ack_bit: bool = True
    ideal_scheduling: bool = False
    sched_hops: int | None = None

    @property
    def n(self):
        return self.topology.n_nodes

    @property
    def n_hops(self):
        if self.protocol == "one_hop":
            return 1
        if self.protocol in ("fixed_2hop", "adaptive_2hop", "duty_cycled"):
            return 2
        if self.protocol in ("fixed_3hop", "adaptive_3hop"):
            return 3
        if self.protocol == "nonsim_relay":
            return self.hops
        return 1

    @property
    def adaptive(self):
        return self.protocol.startswith("adaptive")

    @property
    def downlink_time(self):
        pp = self.phase_plan
        if pp.downlink_budget_s is not None:
            return pp.downlink_budget_s
        return (1.0 - pp.f_S) * self.cycle_time_s / 2.0

    @property
    def uplink_time(self):
        pp = self.phase_plan
        if pp.uplink_budget_s is not None:
            return pp.uplink_budget_s
        return (1.0 - pp.f_S) * self.cycle_time_s / 2.0

    @property
    def scheduling_time(self):
        return self.phase_plan.f_S * self.cycle_time_s

    def with_snr_db(self, snr_db):
        return replace(self, channel=ChannelParams.from_db(snr_db, self.channel.bandwidth_hz))

    def with_fractions(self, f_D=None, f_U=None):
        pp = self.phase_plan
        pp = replace(pp, f_D=tuple(f_D) if f_D is not None else pp.f_D,
                     f_U=tuple(f_U) if f_U is not None else pp.f_U)
        return replace(self, phase_plan=pp)


@dataclass(frozen=True)
class FailureProbability:
    p: float
    log_p: float
    source: str = "analytic"
    ci_halfwidth: float | None = None
    trials: int | None = None
    failures: int | None = None

    @classmethod
    def analytic(cls, p):
        p = min(max(float(p), 0.0), 1.0)
        return cls(p, math.log(p) if p > 0 else -math.inf, "analytic")

    @classmethod
    def monte_carlo(cls, failures, trials, ci_halfwidth):
        p = failures / trials
        return cls(p, math.log(p) if p > 0 else -math.inf, "monte_carlo",
                   ci_halfwidth, trials, failures)


def validate(config: ScenarioConfig) -> ScenarioConfig:
    """Return ``config`` unchanged if every invariant holds.

    Otherwise the first violation is raised; its ``violations`` attribute
    lists all of them.
    """
    errs = []
    top, ch, pp = config.topology, config.channel, config.phase_plan

    def positive(name, v):
        if v is None or not (v > 0) or not math.isfinite(v):
            errs.append(NonPositiveField(name, f"got {v!r}"))

    positive("snr_linear", ch.snr_linear)
    positive("bandwidth_hz", ch.bandwidth_hz)
    positive("message_bits", config.message_bits)
    positive("cycle_time_s", config.cycle_time_s)
    positive("n_nodes", top.n_nodes)

    if top.kind not in ("star", "generic"):
        errs.append(InvalidField("kind", top.kind))
    elif top.kind == "star":
        if top.n_streams not in (None, 2 * top.n_nodes):
            errs.append(InvalidField("n_streams", "star requires s = 2n"))
        if top.avg_subscribers != 1:
            errs.append(InvalidField("avg_subscribers", "star requires d = 1"))
    else:
        positive("n_streams", top.n_streams)
        if not (1 <= top.avg_subscribers <= top.n_nodes - 1):
            errs.append(InvalidField("avg_subscribers", "need 1 <= d <= n_nodes - 1"))

    if config.protocol not in PROTOCOLS:
        errs.append(InvalidField("protocol", config.protocol))
    elif top.kind == "generic" and config.protocol not in (
            "one_hop", "fixed_2hop", "fixed_3hop", "nonsim_relay", "freq_hop", "duty_cycled"):
        errs.append(InvalidField("protocol", "adaptive schedules are analysed for stars only"))

    for side, fr in (("f_D", pp.f_D), ("f_U", pp.f_U)):
        if len(fr) != 3:
            errs.append(InvalidField(side, "need three phase fractions"))
            continue
        for k, f in enumerate(fr, 1):
            if not (f >= 0):
                errs.append(NonPositiveField(f"{side}{k}", f"got {f!r}"))
        if abs(math.fsum(fr) - 1.0) > 1e-9:
            errs.append(FractionSumMismatch(side, f"fractions sum to {math.fsum(fr)!r}"))
        hops = config.n_hops if config.protocol in STAR_PROTOCOLS else None
        if hops is not None and len(fr) == 3:
            for k in range(hops, 3):
                if fr[k] != 0:
                    errs.append(FractionSumMismatch(f"{side}{k + 1}",
                                                    f"a {hops}-hop plan needs phase {k + 1} = 0"))
    if not (0 <= pp.f_S < 1):
        errs.append(InvalidField("f_S", f"got {pp.f_S!r}"))
    for name in ("downlink_budget_s", "uplink_budget_s"):
        v = getattr(pp, name)
        if v is not None:
            positive(name, v)
    if config.cycle_time_s and config.cycle_time_s > 0:
        used = config.downlink_time + config.uplink_time + config.scheduling_time
        if used > config.cycle_time_s * (1 + 1e-9):
            errs.append(FractionSumMismatch("cycle_time_s", "phase budgets exceed the cycle"))
    if (config.adaptive and not config.ideal_scheduling and config.topology.kind == "star"
            and pp.f_S <= 0):
        errs.append(NonPositiveField("f_S", "adaptive schedule without ideal scheduling needs T_S > 0"))

    required = _KNOBS.get(config.protocol, ())
    for k in _ALL_KNOBS:
        v = getattr(config, k)
        if k in required and v is None:
            errs.append(MissingProtocolKnob(k, f"required by {config.protocol}"))
        elif k not in required and v is not None:
            errs.append(UnexpectedProtocolKnob(k, f"not used by {config.protocol}"))
    if config.protocol == "nonsim_relay":
        if config.hops is not None and config.hops not in (2, 3):
            errs.append(InvalidField("hops", "need 2 or 3"))
        if config.relays is not None and not (0 <= config.relays <= top.total_nodes - 2):
            errs.append(InvalidField("relays", "need 0 <= r <= nodes - 2"))
    if config.protocol == "freq_hop" and config.subchannels is not None and config.subchannels < 1:
        errs.append(InvalidField("subchannels", "need k_fh >= 1"))
    if config.protocol == "duty_cycled" and config.duty_pct is not None and not (0 <= config.duty_pct <= 100):
        errs.append(InvalidField("duty_pct", "need 0 <= x <= 100"))
    if config.sched_hops not in (None, 2, 3):
        errs.append(InvalidField("sched_hops", "need 2 or 3"))

    if errs:
        first = errs[0]
        first.violations = errs
        raise first
    return config


@dataclass(frozen=True)
class PhaseRates:
    R_D1: object
    R_D2: object
    R_D3: object
    R_U1: object
    R_U2: object
    R_U3: object
    R_S: object


def _rate(bits, t, strict, name):
    if t <= 0:
        if strict:
            raise ZeroPhaseTime(name)
        return np.full(np.shape(bits), np.inf) if np.ndim(bits) else math.inf
    return bits / t


def phase_rates(config: ScenarioConfig, a=0, strict=True) -> PhaseRates:
    """Per-phase rates of a star protocol in bits/s.

    ``a`` is the number of first-phase successes and may be an array.  With
    ``strict=False`` a zero-length phase yields an infinite rate instead of
    raising ZeroPhaseTime.  Phases a protocol does not use are None.
    """
    n, m = config.n, config.message_bits
    hops = config.n_hops
    TD, TU = config.downlink_time, config.uplink_time
    fD, fU = config.phase_plan.f_D, config.phase_plan.f_U
    a = np.asarray(a)
    if np.any(a < 0) or np.any(a > n):
        raise ValueError("need 0 <= a <= n")
    if a.ndim == 0:
        a = int(a)
    out = dict.fromkeys(("R_D1", "R_D2", "R_D3", "R_U1", "R_U2", "R_U3", "R_S"))
    adaptive = config.adaptive
    ack = 1 if (adaptive and config.ack_bit) else 0
    ov = 2 * n if (adaptive and config.sched_overhead) else 0
    out["R_D1"] = _rate(m * n, fD[0] * TD, strict, "R_D1")
    out["R_U1"] = _rate((m + ack) * n, fU[0] * TU, strict, "R_U1")
    for k in range(2, hops + 1):
        if adaptive:
            dbits = m * (n - a) + ov
            ubits = m * (n - a)
        else:
            dbits = ubits = m * n
        out[f"R_D{k}"] = _rate(dbits, fD[k - 1] * TD, strict, f"R_D{k}")
        out[f"R_U{k}"] = _rate(ubits, fU[k - 1] * TU, strict, f"R_U{k}")
    if adaptive and not (config.ideal_scheduling and config.scheduling_time <= 0):
        h = config.sched_hops or hops
        out["R_S"] = _rate(2 * n * (n + 1) * h, config.scheduling_time, strict, "R_S")
    return PhaseRates(**out)
