"""
A single trajectory does not explode
====================================

Started from one point, the noisy system keeps wandering: it visits large
|z| now and then but returns. Compare with the deterministic run from the
same point, which explodes almost at once.
"""
from blowupflow import (IntegratorOptions, ModelParams, State, ZeroPath, run_onepoint_longrun,
                        simulate)

params = ModelParams(n=2, sigma=1.0)
summary = run_onepoint_longrun(params, (2.0, 0.0), t_long=200.0, burn_in=20.0, seed=3)
print("exploded:", summary.exploded)
print("steps:", summary.n_steps, " excursions beyond", summary.excursion_radius, ":", summary.excursions)
print("time-weighted mean |z|:", round(summary.moments["mean_abs"], 3),
      " window means:", [round(v, 3) for v in summary.window_means])

det = simulate(ModelParams(2), None, ZeroPath(), State(2.0, 0.0),
               IntegratorOptions(t_end=200.0, R_blow=1e6 * 2.0))
print("without noise:", det.outcome.value, "at t =", round(det.outcome_time, 4))
