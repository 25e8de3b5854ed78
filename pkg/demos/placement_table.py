"""Print the optimal tether placement of a few rooftop rings next to the
vertical full-length reference."""
import math

from tethered_coverage import build_deployment_plan, preset

env, net = preset("urban")
opt = build_deployment_plan(env, net)
ref = build_deployment_plan(env, net, reference=True)
print(f"p_out = {opt.p_out:.4f}")
print("ring    R_n  T_opt  theta  h_u    R_u   pl_avg(dB)  ref pl_avg(dB)")
for a, b in zip(opt.rings[::7], ref.rings[::7]):
    print(f"{a.ring:4d} {a.R_n:6.1f} {a.T_opt:6.1f} {math.degrees(a.theta_opt):6.1f} "
          f"{a.h_u:5.1f} {a.R_u:6.1f} {10 * math.log10(a.pl_avg):10.2f} {10 * math.log10(b.pl_avg):14.2f}")
