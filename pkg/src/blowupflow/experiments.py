"""Experiment harness: flow blow-up probability versus x0, flow composition
checks, one-point long runs and the drift cross-check.

Every Monte Carlo replicate owns one noise path derived from
``(seed, replicate)``, so any row of a report can be regenerated alone.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import binomtest

from .drift import (ConeParams, ModelParams, State, drift_binomial, drift_polar,
                    max_alpha)
from .flow import (B, R, bisect_exploding_point, check_events, flow_options,
                   scan_segment)
from .integrator import IntegratorOptions, Outcome, simulate
from .noise import BrownianPath, NoisePath, ZeroPath, fork_replicate

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TIME_BOUND_FACTOR = 1.02
REPLICATE_FIELDS = ("x0", "replicate", "seed", "strict", "lenient", "b1", "b2", "blowup_time")


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(k, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class ExperimentConfig:
    params: ModelParams
    alpha: float
    c: float
    x0_grid: list[float]
    replicates: int
    seed: int = 0
    m: int = 65
    tol: float = 1e-10
    max_iter: int = 200
    eta: float = 1e-2
    r_blow_factor: float = 1e3
    depth: int = 16
    workers: int = 1
    zero_noise: bool = False
    out_dir: Optional[str] = None

    def __post_init__(self):
        self.x0_grid = [float(v) for v in self.x0_grid]
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if list(self.x0_grid) != sorted(self.x0_grid) or not self.x0_grid:
            raise ValueError("x0_grid must be non-empty and sorted ascending")
        for x0 in self.x0_grid:
            self.cone(x0)  # validates x0 > x_star + c

    def cone(self, x0: float) -> ConeParams:
        return ConeParams.build(self.params, self.alpha, self.c, x0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = {"n": self.params.n, "sigma": self.params.sigma,
                       "f_coeffs": [[j, k, c.real, c.imag]
                                    for (j, k), c in self.params.f_coeffs.items()]}
        return d


@dataclass
class ReplicateResult:
    x0: float
    replicate: int
    seed: int
    strict: bool
    lenient: bool
    b1: bool
    b2: bool
    blowup_time: Optional[float]
    witness_blowup: bool = False
    infx_ok: bool = False
    g_in_scan: bool = False
    bisection_status: str = ""
    bisection_width: float = math.nan
    runtime: float = 0.0
    error: Optional[str] = None

    @property
    def inclusion_violation(self) -> bool:
        return self.b1 and self.b2 and not self.lenient

    def time_violation(self, T: float) -> bool:
        return (self.witness_blowup and self.b1 and self.blowup_time is not None
                and self.blowup_time > TIME_BOUND_FACTOR * T)


def _initial_bracket(scan) -> Optional[tuple[float, float]]:
    if scan.brackets:
        return scan.brackets[0]
    ys, tags = scan.ys, scan.tags
    b_ys = [y for y, t in zip(ys, tags) if t == B]
    r_ys = [y for y, t in zip(ys, tags) if t == R]
    if b_ys and r_ys and max(b_ys) < min(r_ys):
        return max(b_ys), min(r_ys)
    return None


def run_replicate(cfg: ExperimentConfig, x0: float, replicate: int) -> ReplicateResult:
    """Scan the segment at x0 under one path, then bisect towards the trapped point."""
    started = time.perf_counter()
    cone = cfg.cone(x0)
    params = cfg.params
    if cfg.zero_noise:
        path: NoisePath = ZeroPath()
        seed = 0
    else:
        path = fork_replicate(cfg.seed, replicate, horizon=2.0 * cone.T)
        seed = path.seed
    opts = flow_options(cone, eta=cfg.eta, R_blow=cfg.r_blow_factor * x0)
    try:
        scan = scan_segment(params, cone, path, cfg.m, opts)
        w = scan.blowup_witness()
        status, width = "scan", 0.0
        if w is not None:
            record = simulate(params, cone, path, State(x0, scan.points[w].y), opts)
            g_found = True
        else:
            res = bisect_exploding_point(params, cone, path, cfg.tol, cfg.max_iter,
                                         bracket=_initial_bracket(scan), opts=opts)
            record, g_found = res.record, res.g_found
            status, width = res.status, res.width
        flags = check_events(record, path, cone, params.sigma, cfg.depth)
    except Exception as exc:  # noqa: BLE001 - a failed replicate is counted, not fatal
        log.warning("replicate x0=%g r=%d failed: %s", x0, replicate, exc)
        return ReplicateResult(x0, replicate, seed, False, False, False, False, None,
                               runtime=time.perf_counter() - started, error=str(exc))
    witness_blowup = record.outcome is Outcome.BLOWUP and (record.tau is None)
    bt = record.blowup_time if witness_blowup else None
    strict = bool(witness_blowup and bt <= TIME_BOUND_FACTOR * cone.T)
    lenient = bool(scan.has_g or g_found)
    return ReplicateResult(
        x0=x0, replicate=replicate, seed=seed, strict=strict, lenient=lenient,
        b1=flags.B1, b2=flags.B2, blowup_time=bt, witness_blowup=witness_blowup,
        infx_ok=flags.infX_ok, g_in_scan=scan.has_g, bisection_status=status,
        bisection_width=width, runtime=time.perf_counter() - started)


def _run_task(args):
    cfg, x0, r = args
    return run_replicate(cfg, x0, r)


@dataclass
class MonteCarloReport:
    config: dict
    rows: list[dict]
    replicates: list[ReplicateResult]
    inclusion_violations: int
    time_violations: int
    trend_ok: bool
    schema_version: int = SCHEMA_VERSION
    note: str = ("x0_grid and success thresholds are a desk-scale calibration of a "
                 "limit statement, not ground truth")

    def row(self, x0: float) -> dict:
        for r in self.rows:
            if r["x0"] == x0:
                return r
        raise KeyError(x0)

    @property
    def ok(self) -> bool:
        return self.inclusion_violations == 0 and self.time_violations == 0

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "config": self.config,
                "rows": self.rows, "inclusion_violations": self.inclusion_violations,
                "time_violations": self.time_violations, "trend_ok": self.trend_ok,
                "note": self.note}

    def save(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path = out / "montecarlo.json"
        json_path.write_text(json.dumps(self.to_dict(), indent=2))
        csv_path = out / "montecarlo_replicates.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REPLICATE_FIELDS)
            for rep in self.replicates:
                w.writerow([rep.x0, rep.replicate, rep.seed, int(rep.strict), int(rep.lenient),
                            int(rep.b1), int(rep.b2),
                            "" if rep.blowup_time is None else repr(rep.blowup_time)])
        return json_path, csv_path


def trend_is_monotone(rows: list[dict], key: str = "lenient") -> bool:
    """Non-decreasing in x0 up to overlap of the 95% Wilson intervals."""
    for i, a in enumerate(rows):
        for b in rows[i + 1:]:
            if b[f"p_{key}"] < a[f"p_{key}"] and b[f"ci_{key}"][1] < a[f"ci_{key}"][0]:
                return False
    return True


def summarize(cfg: ExperimentConfig, results: list[ReplicateResult]) -> MonteCarloReport:
    rows = []
    incl = tviol = 0
    for x0 in cfg.x0_grid:
        reps = [r for r in results if r.x0 == x0]
        T = cfg.cone(x0).T
        n = len(reps)
        strict = sum(r.strict for r in reps)
        lenient = sum(r.lenient for r in reps)
        both = sum(r.b1 and r.b2 for r in reps)
        v4 = sum(r.inclusion_violation for r in reps)
        vt = sum(r.time_violation(T) for r in reps)
        incl += v4
        tviol += vt
        rows.append({
            "x0": x0, "T": T, "N": n,
            "strict": strict, "lenient": lenient,
            "p_strict": strict / n, "p_lenient": lenient / n,
            "ci_strict": wilson_interval(strict, n), "ci_lenient": wilson_interval(lenient, n),
            "freq_b1b2": both / n,
            "inclusion_violations": v4, "time_violations": vt,
            "errors": sum(r.error is not None for r in reps),
            "mean_runtime": float(np.mean([r.runtime for r in reps])),
        })
    return MonteCarloReport(cfg.to_dict(), rows, results, incl, tviol, trend_is_monotone(rows))


def run_montecarlo(cfg: ExperimentConfig) -> MonteCarloReport:
    tasks = [(cfg, x0, r) for x0 in cfg.x0_grid for r in range(cfg.replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=8))
    else:
        results = [_run_task(t) for t in tasks]
    report = summarize(cfg, results)
    if cfg.out_dir:
        report.save(cfg.out_dir)
    return report


@dataclass
class FlowCheckReport:
    comparable: bool
    eta: float
    discrepancy: float
    discrepancy_half: float
    direct_end: tuple[float, float] = (math.nan, math.nan)
    composed_end: tuple[float, float] = (math.nan, math.nan)

    @property
    def ratio(self) -> float:
        if self.discrepancy == 0:
            return 0.0 if self.discrepancy_half == 0 else math.inf
        return self.discrepancy_half / self.discrepancy

    @property
    def decreasing(self) -> bool:
        return self.comparable and self.discrepancy_half < self.discrepancy


def _composition_gap(params, path, z0, t_mid, t_end, opts):
    direct = simulate(params, None, path, z0, opts.replace(t_end=t_end))
    if direct.outcome is not Outcome.SURVIVED:
        return None
    if t_mid > 0:
        first = simulate(params, None, path, z0, opts.replace(t_end=t_mid))
        if first.outcome is not Outcome.SURVIVED:
            return None
        mid_state = first.final
    else:
        mid_state = State(*z0)
    second = simulate(params, None, path, mid_state, opts.replace(t_end=t_end), t0=t_mid)
    if second.outcome is not Outcome.SURVIVED:
        return None
    gap = math.hypot(direct.final.x - second.final.x, direct.final.y - second.final.y)
    return gap, tuple(direct.final), tuple(second.final)


def check_flow_property(params: ModelParams, path: NoisePath, z0, t_mid: float, t_end: float,
                        opts: Optional[IntegratorOptions] = None) -> FlowCheckReport:
    """Compare phi_{0,t_end}(z0) with phi_{t_mid,t_end}(phi_{0,t_mid}(z0)) under one path,
    at the given eta and at eta/2.
    """
    if not 0 <= t_mid < t_end:
        raise ValueError("need 0 <= t_mid < t_end")
    z0 = State(float(z0[0]), float(z0[1]))
    if opts is None:
        opts = IntegratorOptions(t_end=t_end, h_max=1e-2, eta=1e-2,
                                 R_blow=1e6 * max(1.0, abs(z0.x)), record_stride=1_000_000)
    a = _composition_gap(params, path, z0, t_mid, t_end, opts)
    b = _composition_gap(params, path, z0, t_mid, t_end, opts.replace(eta=opts.eta / 2))
    if a is None or b is None:
        return FlowCheckReport(False, opts.eta, math.nan, math.nan)
    return FlowCheckReport(True, opts.eta, a[0], b[0], a[1], a[2])


@dataclass
class LongRunSummary:
    seed: Optional[int]
    t_long: float
    burn_in: float
    n_steps: int
    exploded: bool
    diagnostics: dict
    moments: dict
    histogram: dict
    excursions: int
    excursion_radius: float
    window_means: list[float]
    samples: dict = field(repr=False, default_factory=dict)

    @property
    def window_stable(self) -> bool:
        a, b = self.window_means
        return abs(a - b) <= 0.1 * max(abs(a), abs(b))

    def to_dict(self, with_samples: bool = False) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "samples"}
        if with_samples:
            d["samples"] = {k: list(map(float, v)) for k, v in self.samples.items()}
        return d

    def save(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path = out / "longrun.json"
        json_path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, **self.to_dict()},
                                        indent=2))
        csv_path = out / "longrun_samples.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y"])
            for row in zip(self.samples["t"], self.samples["x"], self.samples["y"]):
                w.writerow([repr(float(v)) for v in row])
        return json_path, csv_path


def _weighted_mean(values, weights):
    return float(np.sum(values * weights) / np.sum(weights))


def run_onepoint_longrun(params: ModelParams, z0, t_long: float, burn_in: float,
                         stride: int = 100, seed: int = 0, path: Optional[NoisePath] = None,
                         opts: Optional[IntegratorOptions] = None, x_star: float = 1.0,
                         hist_bins: int = 40) -> LongRunSummary:
    """One trajectory on [0, t_long] with no restarts; statistics use time weights
    (steps are adaptive) and exclude [0, burn_in).
    """
    if params.sigma <= 0:
        raise ValueError("the long run needs sigma > 0")
    if not 0 <= burn_in < t_long:
        raise ValueError("need 0 <= burn_in < t_long")
    z0 = State(float(z0[0]), float(z0[1]))
    if path is None:
        path = BrownianPath(seed, horizon=t_long)
    if opts is None:
        opts = IntegratorOptions(t_end=t_long, h_max=1e-2, eta=1e-2,
                                 R_blow=1e6 * max(1.0, abs(z0.x)))
    rec = simulate(params, None, path, z0, opts)
    exploded = rec.outcome is Outcome.BLOWUP
    diagnostics = {"outcome": rec.outcome.value, "outcome_time": rec.outcome_time,
                   "overflow": rec.overflow, "step_limited": rec.step_limited,
                   "max_step_ratio": rec.max_step_ratio}
    if exploded:
        log.warning("numerical explosion at t=%s; see diagnostics", rec.outcome_time)
        dt = np.diff(rec.t[-20:])
        diagnostics.update(last_steps=dt.tolist(), last_states=np.c_[rec.x[-5:], rec.y[-5:]].tolist())

    t, x, y = rec.t, rec.x, rec.y
    r = np.hypot(x, y)
    # left-point weights: each state holds until the next recorded time
    w = np.diff(t)
    tl, xl, yl, rl = t[:-1], x[:-1], y[:-1], r[:-1]
    keep = tl >= burn_in
    if not np.any(keep):
        keep = np.ones_like(tl, dtype=bool)
    wk = w[keep]
    moments = {
        "mean_x": _weighted_mean(xl[keep], wk), "mean_y": _weighted_mean(yl[keep], wk),
        "var_x": _weighted_mean((xl[keep] - _weighted_mean(xl[keep], wk)) ** 2, wk),
        "var_y": _weighted_mean((yl[keep] - _weighted_mean(yl[keep], wk)) ** 2, wk),
        "mean_abs": _weighted_mean(rl[keep], wk),
        "max_abs": float(np.max(r)),
    }
    lim = 10.0 * x_star
    counts, xe, ye = np.histogram2d(xl[keep], yl[keep], bins=hist_bins,
                                    range=[[-lim, lim], [-lim, lim]], weights=wk)
    histogram = {"x_edges": xe.tolist(), "y_edges": ye.tolist(),
                 "time_density": (counts / np.sum(wk)).tolist(),
                 "time_outside": float(np.sum(wk[(np.abs(xl[keep]) > lim) | (np.abs(yl[keep]) > lim)])
                                       / np.sum(wk))}
    outside = r > lim
    excursions = int(np.count_nonzero(outside[1:] & ~outside[:-1]) + int(outside[0]))

    windows = []
    end = rec.t[-1]
    for lo, hi in ((end - 2 * burn_in, end - burn_in), (end - burn_in, end)):
        sel = (tl >= lo) & (tl < hi)
        windows.append(_weighted_mean(rl[sel], w[sel]) if np.any(sel) else math.nan)

    thin = slice(None, None, max(1, int(stride)))
    samples = {"t": t[thin], "x": x[thin], "y": y[thin]}
    return LongRunSummary(
        seed=getattr(path, "seed", None), t_long=t_long, burn_in=burn_in,
        n_steps=rec.n_steps, exploded=exploded, diagnostics=diagnostics, moments=moments,
        histogram=histogram, excursions=excursions, excursion_radius=lim,
        window_means=windows, samples=samples)


@dataclass
class DriftCheckReport:
    n_points: int
    n_models: int
    max_rel_error: float
    worst: dict

    def to_dict(self) -> dict:
        return asdict(self)


def random_model(rng: np.random.Generator, n: Optional[int] = None, sigma: float = 0.0,
                 max_terms: int = 4, scale: float = 5.0) -> ModelParams:
    """A random admissible F for exponent n (drawn from 2..8 if not given)."""
    n = int(rng.integers(2, 9)) if n is None else n
    coeffs = {}
    for _ in range(int(rng.integers(0, max_terms + 1))):
        j = int(rng.integers(0, n))
        k = int(rng.integers(0, n - j))
        coeffs[(j, k)] = complex(*rng.normal(0.0, scale, 2))
    return ModelParams(n, sigma, coeffs)


def run_drift_check(n_points: int = 100_000, n_models: int = 20, seed: int = 0) -> DriftCheckReport:
    """Binomial vs polar drift on random points with x > 0, |y| <= 10x, x <= 1e3.

    The error is measured relative to r^n + |F|, the natural size of the drift.
    """
    rng = np.random.default_rng(seed)
    worst = {"rel_error": 0.0}
    per_model = max(1, n_points // n_models)
    for _ in range(n_models):
        params = random_model(rng)
        x = 10.0 ** rng.uniform(-3, 3, per_model)
        y = x * rng.uniform(-10, 10, per_model)
        s = State(x, y)
        bx, by = drift_binomial(params, s)
        px, py = drift_polar(params, s)
        scale = np.hypot(x, y) ** params.n + sum(
            abs(c) * np.hypot(x, y) ** (j + k) for (j, k), c in params.f_coeffs.items())
        err = np.maximum(np.abs(bx - px), np.abs(by - py)) / scale
        i = int(np.argmax(err))
        if err[i] > worst["rel_error"]:
            worst = {"rel_error": float(err[i]), "n": params.n, "x": float(x[i]), "y": float(y[i])}
    return DriftCheckReport(per_model * n_models, n_models, worst["rel_error"], worst)


def alpha_default(n: int) -> float:
    """Half of the admissible cone slope, used when a config gives no alpha."""
    return 0.5 * max_alpha(n)
