"""Compare the analytic coverage probability with a Monte-Carlo estimate for
both presets, split by the kind of serving station."""
from tethered_coverage import build_deployment_plan, coverage_probability, preset, simulate_coverage

for name in ("urban", "suburban"):
    env, net = preset(name)
    plan = build_deployment_plan(env, net)
    ana = coverage_probability(env, net, "exact", plan=plan)
    est = simulate_coverage(env, net, plan, trials=4000)
    print(f"{name:9s} analytic {ana.total:.4f}  simulated {est.estimate:.4f} +/- {est.half_width:.4f}")
    print(f"          by server: tbs {ana.tbs:.4f}  aerial {ana.aerial:.4f}  own cluster {ana.cluster:.4f}")
