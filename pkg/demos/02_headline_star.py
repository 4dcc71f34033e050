"""How low can the SNR go for a 30-node star?

Messages of 160 bits each way, a 2 ms cycle and 20 MHz of bandwidth.  We
look for the smallest nominal SNR that keeps the cycle failure below 1e-9,
first with even phase splits, then with the phase fractions optimised.
Takes a couple of minutes.
"""
from occupycow import ChannelParams, PhasePlan, ScenarioConfig, TopologySpec
from occupycow.analytic_star import star_cycle_failure
from occupycow.optimizer import AllocationGrid, SnrSearchSpec, min_snr, optimize_cycle_allocation

spec = SnrSearchSpec(1e-9, (-20.0, 140.0))
base = ScenarioConfig(TopologySpec(30), ChannelParams.from_db(0.0, 20e6), 160, 2e-3,
                      "adaptive_3hop", PhasePlan.even(3), ideal_scheduling=True)

even = min_snr(base, spec)
print(f"even thirds:      {even:6.2f} dB")

res = optimize_cycle_allocation(base, AllocationGrid(0.02), spec)
print(f"optimised phases: {res.min_snr_db:6.2f} dB")
print(f"  downlink fractions {res.f_D}")
print(f"  uplink fractions   {res.f_U}")

b = star_cycle_failure(res.config)
print(f"  P(downlink) {b.p_downlink:.2e}, P(uplink) {b.p_uplink:.2e}, bound {b.p_cycle_bound:.2e}")
