"""Is it worth letting nodes sleep?

Each message keeps a fraction x of the other nodes awake as relays.  Fewer
relays need a higher transmit SNR while awake, but nodes are awake less
often.  With a receiver background draw of 10 dB the total is minimised
around the duty where the awake transmit power meets the background.
"""
import math

from occupycow import ChannelParams, PhasePlan, ScenarioConfig, TopologySpec
from occupycow.optimizer import SnrSearchSpec, duty_cycle_study

spec = SnrSearchSpec(1e-9, (-20.0, 140.0))
cfg = ScenarioConfig(TopologySpec(30), ChannelParams.from_db(0.0, 20e6), 160, 2e-3,
                     "fixed_2hop", PhasePlan.even(2))

for bg in (10.0, -math.inf):
    rows, best = duty_cycle_study(cfg, range(2, 101, 2), bg, spec)
    print(f"background {bg} dB")
    print("  duty  awake_snr  avg_tx  avg_total")
    for x, awake, tx, tot in rows[::4] + [rows[-1]]:
        print(f"  {x:4.0f}  {awake:9.2f}  {tx:6.2f}  {tot:9.2f}")
    print(f"  best duty {best[0]:.0f}% (awake {best[1]:.2f} dB, total {best[3]:.2f} dB)\n")
