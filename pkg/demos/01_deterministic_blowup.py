"""
Deterministic blow-up on the positive axis
==========================================

With no noise and F = 0 the point (x0, 0) solves x' = x^n, which explodes
at t = x0^(1-n) / (n-1). The adaptive integrator should find it.
"""
import numpy as np

from blowupflow import IntegratorOptions, ModelParams, State, ZeroPath, simulate

x0 = 10.0
for n in (2, 3, 4):
    exact = x0 ** (1 - n) / (n - 1)
    for eta in (1e-2, 1e-3):
        rec = simulate(ModelParams(n), None, ZeroPath(), State(x0, 0.0),
                       IntegratorOptions(t_end=1.0, eta=eta, R_blow=1e6 * x0))
        err = (rec.outcome_time - exact) / exact
        print(f"n={n} eta={eta:g}: {rec.outcome.value} at {rec.outcome_time:.6g} "
              f"(exact {exact:.6g}, rel. err {err:+.2e}, {rec.n_steps} steps)")

# steps shrink like |z|^(1-n) as the solution takes off
rec = simulate(ModelParams(2), None, ZeroPath(), State(x0, 0.0),
               IntegratorOptions(t_end=1.0, R_blow=1e6 * x0))
h = np.diff(rec.t)
print("first / last step:", h[0], h[-2])
