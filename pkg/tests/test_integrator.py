import json
import math

import numpy as np
import pytest

from blowupflow.drift import ConeParams, ModelParams, State
from blowupflow.integrator import IntegratorOptions, Outcome, gronwall_floor, simulate
from blowupflow.noise import BrownianPath, NoiseRangeError, ZeroPath


def axis_run(n=2, x0=10.0, eta=1e-3, R=1e8, t_end=1.0, **kw):
    opts = IntegratorOptions(t_end=t_end, h_max=1e-2, eta=eta, R_blow=R, **kw)
    return simulate(ModelParams(n), None, ZeroPath(), State(x0, 0.0), opts)


def exact_blowup(n, x0, R=math.inf):
    # x' = x^n: x(t)^(1-n) = x0^(1-n) - (n-1) t
    return (x0 ** (1 - n) - (R ** (1 - n) if R < math.inf else 0.0)) / (n - 1)


def test_deterministic_blowup_time():
    rec = axis_run()
    assert rec.outcome is Outcome.BLOWUP
    assert rec.outcome_time == pytest.approx(exact_blowup(2, 10.0), rel=0.02)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_axis_symmetry_preserved(n):
    rec = axis_run(n=n, x0=3.0, eta=1e-2, t_end=10.0)
    assert rec.outcome is Outcome.BLOWUP
    assert np.all(rec.y == 0.0)
    assert np.all(np.diff(rec.x) > 0)
    assert rec.outcome_time == pytest.approx(exact_blowup(n, 3.0), rel=0.05)


def test_blowup_error_decreases_with_eta():
    exact = exact_blowup(2, 10.0, 1e8)
    errs = [abs(axis_run(eta=e).outcome_time - exact) for e in (1e-2, 5e-3, 2.5e-3)]
    assert errs[0] > errs[1] > errs[2]
    assert 0.3 <= errs[1] / errs[0] <= 0.7


def test_exit_upper_deterministic():
    params = ModelParams(2)
    cone = ConeParams.build(params, 0.5, 1.0, 10.0)
    rec = simulate(params, cone, ZeroPath(), State(10.0, 2.0), IntegratorOptions.for_cone(cone))
    assert rec.outcome is Outcome.EXIT_UPPER
    assert rec.events["tau_upper"] == rec.outcome_time
    assert rec.tau == rec.outcome_time
    # the exit is on the boundary up to interpolation error
    assert abs(rec.y[-1] - 0.5 * rec.x[-1]) <= 1e-2 * rec.x[-1]


def test_mirror_exit_lower():
    params = ModelParams(3)
    cone = ConeParams.build(params, 0.2, 1.0, 10.0)
    opts = IntegratorOptions.for_cone(cone)
    up = simulate(params, cone, ZeroPath(), State(10.0, 1.0), opts)
    down = simulate(params, cone, ZeroPath(), State(10.0, -1.0), opts)
    assert up.outcome is Outcome.EXIT_UPPER and down.outcome is Outcome.EXIT_LOWER
    assert up.outcome_time == down.outcome_time
    assert np.array_equal(up.y, -down.y)


def test_start_outside_cone_exits_immediately():
    params = ModelParams(2)
    cone = ConeParams.build(params, 0.5, 1.0, 10.0)
    rec = simulate(params, cone, ZeroPath(), State(10.0, 6.0), IntegratorOptions.for_cone(cone))
    assert rec.outcome is Outcome.EXIT_UPPER and rec.outcome_time == 0.0


def test_step_ratio_safety():
    params = ModelParams(3, 1.0)
    cone = ConeParams.build(params, 0.2, 1.0, 5.0)
    opts = IntegratorOptions.for_cone(cone, eta=1e-2)
    for seed in range(10):
        rec = simulate(params, cone, BrownianPath(seed, horizon=opts.t_end), State(5.0, 0.3), opts)
        assert rec.max_step_ratio <= 1.0 + 1e-9


def test_overflow_flagged():
    rec = simulate(ModelParams(5), None, ZeroPath(), State(10.0, 0.0),
                   IntegratorOptions(t_end=1.0, h_max=1e-2, eta=0.5, R_blow=1e300))
    assert rec.outcome is Outcome.BLOWUP
    assert np.all(np.isfinite(rec.x))


def test_record_invariants():
    params = ModelParams(2, 0.5)
    cone = ConeParams.build(params, 0.5, 1.0, 10.0)
    opts = IntegratorOptions.for_cone(cone)
    for seed in range(5):
        rec = simulate(params, cone, BrownianPath(seed, horizon=opts.t_end), State(10.0, 0.5), opts)
        assert np.all(np.diff(rec.t) > 0)
        assert np.all(np.isfinite(rec.x)) and np.all(np.isfinite(rec.y))
        assert rec.t[0] == 0.0 and rec.x[0] == 10.0
        if rec.outcome is Outcome.BLOWUP:
            assert math.hypot(*rec.final) >= opts.R_blow * (1 - 1e-12)
        if rec.tau is not None:
            assert rec.outcome in (Outcome.EXIT_UPPER, Outcome.EXIT_LOWER)


def test_record_stride_keeps_endpoints():
    full = axis_run(eta=1e-2)
    thin = axis_run(eta=1e-2, record_stride=10)
    assert thin.t.size < full.t.size
    assert thin.t[-1] == full.t[-1] and thin.x[-1] == full.x[-1]


def test_validation():
    params = ModelParams(2)
    with pytest.raises(ValueError):
        simulate(params, None, ZeroPath(), State(10.0, 0.0), IntegratorOptions(t_end=1.0, R_blow=100.0))
    with pytest.raises(NoiseRangeError):
        simulate(params, None, BrownianPath(0, horizon=0.5), State(1.0, 0.0), IntegratorOptions(t_end=1.0))
    with pytest.raises(ValueError):
        IntegratorOptions(t_end=1.0, eta=0.0)
    with pytest.raises(ValueError):
        IntegratorOptions(t_end=math.inf)


def test_save_roundtrip(tmp_path):
    rec = axis_run(eta=1e-2)
    csv_path, json_path = rec.save(tmp_path / "run")
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], rec.t) and np.array_equal(data[:, 1], rec.x)
    meta = json.loads(json_path.read_text())
    assert meta["outcome"] == "BlowUp" and meta["outcome_time"] == rec.outcome_time


def test_gronwall_floor_values():
    cone = ConeParams.build(ModelParams(2), 0.5, 1.0, 11.0)
    assert cone.T == pytest.approx(1 / 3)
    assert gronwall_floor(cone, 0.0) == 10.0
    assert gronwall_floor(cone, 0.99 * cone.T) == pytest.approx(1000.0, rel=1e-9)
    cone3 = ConeParams.build(ModelParams(3), 0.2, 1.0, 11.0)
    assert gronwall_floor(cone3, 0.99 * cone3.T) == pytest.approx(10.0 * 10.0, rel=1e-9)
    with pytest.raises(ValueError):
        gronwall_floor(cone, cone.T)


@pytest.mark.parametrize("n, coeffs", [(2, {}), (3, {(1, 1): 0.5 + 0.5j}), (4, {(2, 0): -1.0})])
def test_gronwall_domination_deterministic(n, coeffs):
    params = ModelParams(n, 0.0, coeffs)
    alpha = 0.4 * math.tan(math.pi / (2 * n))
    cone = ConeParams.build(params, alpha, 1.0, 12.0)
    opts = IntegratorOptions.for_cone(cone, eta=1e-3)
    for y in np.linspace(-0.9, 0.9, 7) * alpha * cone.x0:
        rec = simulate(params, cone, ZeroPath(), State(cone.x0, y), opts)
        stop = min(rec.tau or math.inf, rec.outcome_time or math.inf, cone.T)
        sel = rec.t < stop
        floor = np.array([gronwall_floor(cone, t) for t in rec.t[sel]])
        assert np.all(rec.x[sel] >= 0.99 * floor)


def test_time_shift_consistency():
    # integrating from t0 with the same path gives the same law of steps (ZeroPath: autonomous)
    params = ModelParams(2)
    a = simulate(params, None, ZeroPath(), State(1.0, 0.2), IntegratorOptions(t_end=1.0, R_blow=1e6))
    b = simulate(params, None, ZeroPath(), State(1.0, 0.2), IntegratorOptions(t_end=1.5, R_blow=1e6), t0=0.5)
    assert b.t[0] == 0.5
    assert a.final == pytest.approx(tuple(b.final), rel=1e-9)
