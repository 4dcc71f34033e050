"""Compare cooperative relaying against the usual alternatives.

For each network size the table lists the SNR needed for a 1e-9 cycle
failure: direct transmission, a full-cycle retransmission reference,
relays taking turns, frequency-hopping repetition and simultaneous
relaying.  Relay and sub-channel counts are optimised per point.
"""
from occupycow import ChannelParams, PhasePlan, ScenarioConfig, TopologySpec
from occupycow.optimizer import SnrSearchSpec, sweep_min_snr

spec = SnrSearchSpec(1e-9, (-20.0, 140.0))
tmpl = ScenarioConfig(TopologySpec(30), ChannelParams.from_db(0.0, 20e6), 160, 2e-3,
                      "fixed_2hop", PhasePlan.even(2), ideal_scheduling=True)
schemes = ("one_hop", "harq", "nonsim_relay", "freq_hop", "fixed_2hop", "adaptive_3hop_even")
ns = (2, 5, 10, 20, 30)

rows = sweep_min_snr(tmpl, ns, schemes, spec)
table = {(r.scheme, r.n): r for r in rows}
print("scheme".ljust(20) + "".join(f"n={n:<7}" for n in ns))
for sc in schemes:
    cells = []
    for n in ns:
        r = table[(sc, n)]
        extra = f"({r.inner_param})" if r.inner_param is not None else ""
        cells.append(f"{r.min_snr_db:5.1f}{extra}".ljust(9))
    print(sc.ljust(20) + "".join(cells))
print("\nbracketed numbers: best relay count / sub-channel count")
