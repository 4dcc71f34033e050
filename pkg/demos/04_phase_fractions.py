"""Where should the downlink time go?

For each star size the three downlink phase fractions are searched on a
2% grid.  Small networks lean on the first broadcast; larger ones keep a
long first phase and give the last relay round more than the middle one.
"""
from occupycow import ChannelParams, PhasePlan, ScenarioConfig, TopologySpec
from occupycow.optimizer import AllocationGrid, SnrSearchSpec, min_snr, optimize_phase_allocation

spec = SnrSearchSpec(1e-9, (-20.0, 140.0))
grid = AllocationGrid(0.02)

print(" n   f1    f2    f3   optimised  even")
for n in (1, 2, 5, 10, 20, 30):
    cfg = ScenarioConfig(TopologySpec(n), ChannelParams.from_db(0.0, 20e6), 160, 2e-3,
                         "adaptive_3hop", PhasePlan.even(3), ideal_scheduling=True)
    r = optimize_phase_allocation(cfg, grid, "downlink", spec)
    even = min_snr(cfg, spec, component="downlink")
    f1, f2, f3 = r.fractions
    print(f"{n:2d}  {f1:.2f}  {f2:.2f}  {f3:.2f}  {r.min_snr_db:7.2f}  {even:6.2f}")
