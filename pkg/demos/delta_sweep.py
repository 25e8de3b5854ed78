"""Coverage against the fraction of clusters that deploy a UAV."""
from dataclasses import replace

from tethered_coverage import coverage_probability, preset
from tethered_coverage.coverage import DELTA_GRID

for name in ("suburban", "urban"):
    env, net = preset(name)
    curve = [(d, coverage_probability(env, replace(net, delta=d)).total) for d in DELTA_GRID]
    best = max(curve, key=lambda p: p[1])
    print(name, " ".join(f"{d:.1f}:{c:.3f}" for d, c in curve), f"-> best delta {best[0]}")
