import math

import numpy as np
import pytest

from blowupflow.drift import ConeParams, ModelParams, State
from blowupflow.flow import (B, G, R, BracketError, bisect_exploding_point, check_events,
                             flow_options, scan_segment, segment_points, verify_trapping)
from blowupflow.integrator import Outcome, TrajectoryRecord, simulate
from blowupflow.noise import BrownianPath, ZeroPath, fork_replicate


@pytest.fixture(scope="module")
def det2():
    params = ModelParams(2)
    return params, ConeParams.build(params, 0.5, 1.0, 10.0)


def test_segment_points_symmetric():
    cone = ConeParams.build(ModelParams(3), 0.2, 1.0, 10.0)
    y = segment_points(cone, 65)
    assert np.array_equal(y, -y[::-1])
    assert y[32] == 0.0
    assert y[-1] == pytest.approx(math.tan(math.pi / 6) * 10.0)


def test_zero_noise_scan(det2):
    params, cone = det2
    scan = scan_segment(params, cone, ZeroPath(), m=33)
    tags = "".join(scan.tags)
    assert tags == B * 16 + G + R * 16
    assert scan.points[16].outcome is Outcome.BLOWUP
    assert scan.blowup_witness() == 16
    assert scan.brackets == []


def test_scan_reflection_equivariance():
    params = ModelParams(3)
    cone = ConeParams.build(params, 0.2, 1.0, 8.0)
    scan = scan_segment(params, cone, ZeroPath(), m=21)
    swap = {R: B, B: R, G: G}
    assert scan.tags == [swap[t] for t in reversed(scan.tags)]
    times = [p.outcome_time for p in scan.points]
    assert times == times[::-1]


def test_two_point_scan_brackets(det2):
    params, cone = det2
    scan = scan_segment(params, cone, ZeroPath(), m=2)
    assert scan.tags == [B, R]
    assert scan.brackets == [(scan.points[0].y, scan.points[1].y)]


def test_scan_save(det2, tmp_path):
    params, cone = det2
    scan = scan_segment(params, cone, ZeroPath(), m=5)
    j, c = scan.save(tmp_path / "scan")
    lines = c.read_text().splitlines()
    assert lines[0] == "y,tag,exit_time" and len(lines) == 6


def test_bisection_zero_noise(det2):
    params, cone = det2
    res = bisect_exploding_point(params, cone, ZeroPath(), opts=flow_options(cone, eta=1e-3))
    assert res.status == "blowup"
    assert res.y_star == 0.0
    # with R_blow = 1e3 x0 the exact blow-up time is (1/x0)(1 - 1e-3)
    assert res.record.outcome_time == pytest.approx(0.1 * (1 - 1e-3), rel=0.02)


def test_bisection_halves_bracket():
    params = ModelParams(2, 0.1)
    cone = ConeParams.build(params, 0.5, 1.0, 40.0)
    path = fork_replicate(3, 0, horizon=2 * cone.T)
    res = bisect_exploding_point(params, cone, path)
    assert res.resolved
    widths = [h["hi"] - h["lo"] for h in res.history]
    for a, b in zip(widths, widths[1:]):
        if b < a:
            assert b == pytest.approx(a / 2, rel=1e-9)
    if res.status == "blowup":
        assert res.record.outcome is Outcome.BLOWUP
        assert res.record.outcome_time <= 1.02 * cone.T


def test_bisection_rejects_bad_bracket(det2):
    params, cone = det2
    with pytest.raises(BracketError):
        bisect_exploding_point(params, cone, ZeroPath(), bracket=(1.0, 2.0))
    with pytest.raises(BracketError):
        bisect_exploding_point(params, cone, ZeroPath(), bracket=(2.0, 1.0))


def test_bisection_unresolved_reported():
    # a huge tolerance stops the search before any midpoint is tried
    params = ModelParams(2)
    cone = ConeParams.build(params, 0.5, 1.0, 10.0)
    res = bisect_exploding_point(params, cone, ZeroPath(), tol=10.0)
    assert res.status == "unresolved" and not res.resolved


def test_check_events_zero_noise(det2):
    params, cone = det2
    rec = simulate(params, cone, ZeroPath(), State(10.0, 0.0), flow_options(cone))
    flags = check_events(rec, ZeroPath(), cone, 0.0)
    assert flags.B1 and flags.B2 and flags.infX_ok
    assert flags.sup1 == 0.0


def test_b1_frequency_matches_reflection_law():
    # P(sup_[0,T] |W| <= c / sigma) by the series for Brownian exit from a strip
    params = ModelParams(2, 4.0)
    cone = ConeParams.build(params, 0.5, 1.0, 10.0)
    a = cone.c / params.sigma
    T = cone.T
    exact = 4 / math.pi * sum((-1) ** k / (2 * k + 1) * math.exp(-(2 * k + 1) ** 2 * math.pi ** 2 * T / (8 * a * a))
                              for k in range(50))
    dummy = simulate(params, cone, ZeroPath(), State(10.0, 0.0), flow_options(cone))
    n = 1000
    hits = sum(check_events(dummy, fork_replicate(1, i, horizon=2 * T), cone, params.sigma, depth=12).B1
               for i in range(n))
    se = math.sqrt(exact * (1 - exact) / n)
    assert exact - 4 * se <= hits / n <= exact + 4 * se + 0.03


def make_record(t, x, y, events, outcome=Outcome.EXIT_UPPER):
    t = np.asarray(t, float)
    return TrajectoryRecord(State(x[0], y[0]), t, np.asarray(x, float), np.asarray(y, float),
                            outcome, float(t[-1]), events, meta={"options": {"eta": 1e-3}})


@pytest.fixture
def cone10():
    return ConeParams.build(ModelParams(2), 0.5, 1.0, 11.0)  # x1 = 10, levels 2.5 and 1.25


def test_trapping_vacuous(cone10, det2):
    params, cone = det2
    rec = simulate(params, cone, ZeroPath(), State(10.0, 0.0), flow_options(cone))
    assert verify_trapping(rec, cone).status == "vacuous"


def test_trapping_pass_from_start(cone10):
    rec = make_record([0, 0.1, 0.2], [11, 12, 14], [3.0, 4.0, 7.0],
                      {"tau_upper": 0.2, "tau_lower": None, "nu_plus": 0.0, "nu_minus": None})
    rep = verify_trapping(rec, cone10)
    assert rep.status == "pass" and rep.upper_checked and rep.margin == pytest.approx(1.75)


def test_trapping_fail(cone10):
    rec = make_record([0, 0.1, 0.2], [11, 12, 14], [3.0, 0.5, 7.0],
                      {"tau_upper": 0.2, "tau_lower": None, "nu_plus": 0.0, "nu_minus": None})
    assert verify_trapping(rec, cone10).status == "fail"


def test_trapping_lower_side(cone10):
    rec = make_record([0, 0.1, 0.2], [11, 12, 14], [-3.0, -2.0, -7.0],
                      {"tau_upper": None, "tau_lower": 0.2, "nu_plus": None, "nu_minus": 0.0},
                      outcome=Outcome.EXIT_LOWER)
    rep = verify_trapping(rec, cone10)
    assert rep.status == "pass" and rep.lower_checked


def test_trapping_precondition(cone10):
    rec = make_record([0, 0.1, 0.2], [11, 9, 14], [3.0, 4.0, 7.0],
                      {"tau_upper": 0.2, "tau_lower": None, "nu_plus": 0.0, "nu_minus": None})
    assert verify_trapping(rec, cone10).status == "precondition-failed"


def test_trapping_on_simulated_paths():
    params = ModelParams(2, 1.0)
    cone = ConeParams.build(params, 0.5, 1.0, 20.0)
    opts = flow_options(cone, eta=1e-3)
    for i in range(20):
        path = fork_replicate(7, i, horizon=opts.t_end)
        rec = simulate(params, cone, path, State(cone.x0, 0.3 * cone.alpha * cone.x0 * (i % 3)), opts)
        flags = check_events(rec, path, cone, params.sigma)
        assert verify_trapping(rec, cone, flags=flags).ok
