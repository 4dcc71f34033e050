"""Walk one cycle of the adaptive three-hop protocol on a 10-node star.

The fade matrix is drawn by hand: three nodes hear the controller
directly, the rest hang off them one or two relays deep, and the last
node has no usable link at all.
"""
import numpy as np

from occupycow import ChannelParams, PhasePlan, ScenarioConfig, TopologySpec
from occupycow.simulator import simulate_cycle

cfg = ScenarioConfig(TopologySpec(10), ChannelParams.from_db(5.0, 20e6), 160, 2e-3,
                     "adaptive_3hop", PhasePlan.even(3, f_S=0.1), ideal_scheduling=True)

# node 0 is the controller, node i+1 is device S_i
G = np.zeros((11, 11))
for u, v in [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5), (2, 6), (3, 7), (3, 8), (6, 9)]:
    G[u, v] = G[v, u] = 1e9

trace = []
out = simulate_cycle(cfg, G, trace=trace)
print("phase log")
for line in trace:
    print("  " + line)

print("\nhop of success per device (0 = failed)")
print("  downlink:", out.downlink_hop[0])
print("  uplink:  ", out.uplink_hop[0])
print("cycle failed:", bool(out.cycle_failed[0]))
