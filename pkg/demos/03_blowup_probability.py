"""
How often does the flow explode?
================================

For each x0 we scan and bisect under independent paths and count how often
a trapped, exploding point was found. The chance should climb towards one
as x0 grows. Keep N small here; the acceptance suite runs the full sizes.
"""
from blowupflow import ExperimentConfig, ModelParams, run_montecarlo

cfg = ExperimentConfig(ModelParams(3, 1.0), alpha=0.2, c=1.0,
                       x0_grid=[5.0, 10.0, 20.0, 40.0], replicates=25, seed=7)
rep = run_montecarlo(cfg)
for row in rep.rows:
    lo, hi = row["ci_lenient"]
    print(f"x0={row['x0']:>4g}  T={row['T']:.2e}  lenient {row['p_lenient']:.2f} "
          f"[{lo:.2f}, {hi:.2f}]  strict {row['p_strict']:.2f}  B1&B2 {row['freq_b1b2']:.2f}")
print("inclusion violations:", rep.inclusion_violations, " late blow-ups:", rep.time_violations)
