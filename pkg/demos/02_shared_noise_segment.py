"""
One noise path, many starting points
====================================

Every point of the vertical segment through x0 is driven by the same
Brownian path. Points leaving the cone upward are tagged R, downward B, and
anything else G. Bisection between the last B and the first R finds a
point that stays trapped and explodes.
"""
from blowupflow import (ConeParams, ModelParams, bisect_exploding_point, flow_options,
                        fork_replicate, scan_segment)

params = ModelParams(n=3, sigma=1.0)
cone = ConeParams.build(params, alpha=0.2, c=1.0, x0=20.0)
print(f"T = {cone.T:.4g}, x1 = {cone.x1}, epsilon = {cone.epsilon:.4f}")

path = fork_replicate(master_seed=0, replicate_index=0, horizon=2 * cone.T)
scan = scan_segment(params, cone, path, m=33)
print("tags:", "".join(scan.tags))

res = bisect_exploding_point(params, cone, path, opts=flow_options(cone),
                             bracket=scan.brackets[0] if scan.brackets else None)
rec = res.record
print(f"{res.status} after {len(res.history) - 1} midpoints: y* = {res.y_star:.12g}")
print(f"witness {rec.outcome.value} at t = {rec.outcome_time:.5g} (T = {cone.T:.5g})")
