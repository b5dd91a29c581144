"""Shared-noise experiments on the initial segment {x0} x [-tan(pi/2n) x0, tan(pi/2n) x0].

Every initial point is driven by the same path. Points are tagged

* ``R``: leaves the cone through y = alpha*x first, no later than T,
* ``B``: leaves through y = -alpha*x first, no later than T,
* ``G``: neither exit by T (blew up inside the cone, or still inside).

R and B are closed and the segment is connected, so wherever both appear a G
point sits between them; :func:`bisect_exploding_point` homes in on it.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .drift import ConeParams, ModelParams, State
from .integrator import IntegratorOptions, Outcome, TrajectoryRecord, simulate
from .noise import NoisePath, running_sup_abs

log = logging.getLogger(__name__)

R, B, G = "R", "B", "G"


class BracketError(RuntimeError):
    """The supplied bracket does not have a B point below an R point."""


def tag_of(record: TrajectoryRecord, T: float) -> str:
    t = record.outcome_time
    if record.outcome is Outcome.EXIT_UPPER and t <= T:
        return R
    if record.outcome is Outcome.EXIT_LOWER and t <= T:
        return B
    return G


def flow_options(cone: ConeParams, **overrides) -> IntegratorOptions:
    """Integrator defaults for segment runs: horizon 2T, every step recorded,
    R_blow = 1e3 * x0.

    The small blow-up radius matters: a point at distance d from the trapped
    one drifts out of the cone once |z| has grown by roughly
    (alpha / d)^(1/(n-1)), so with a large R_blow the bisection would need far
    more than tol = 1e-10 to ever see a point blow up before it exits.
    """
    overrides.setdefault("record_stride", 1)
    overrides.setdefault("R_blow", 1e3 * cone.x0)
    return IntegratorOptions.for_cone(cone, **overrides)


@dataclass
class PointResult:
    y: float
    tag: str
    outcome: Optional[Outcome]
    outcome_time: Optional[float]
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"y": self.y, "tag": self.tag,
                "outcome": self.outcome.value if self.outcome else None,
                "exit_time": self.outcome_time, "error": self.error}


@dataclass
class SegmentClassification:
    x0: float
    points: list[PointResult]
    brackets: list[tuple[float, float]]
    records: list[Optional[TrajectoryRecord]] = field(default_factory=list, repr=False)

    @property
    def ys(self) -> np.ndarray:
        return np.array([p.y for p in self.points])

    @property
    def tags(self) -> list[str]:
        return [p.tag for p in self.points]

    @property
    def has_g(self) -> bool:
        return any(p.tag == G for p in self.points)

    def blowup_witness(self) -> Optional[int]:
        """Index of a G point that blew up, if any."""
        for i, p in enumerate(self.points):
            if p.tag == G and p.outcome is Outcome.BLOWUP and p.error is None:
                return i
        return None

    def to_dict(self) -> dict:
        return {"x0": self.x0, "points": [p.to_dict() for p in self.points],
                "brackets": [list(b) for b in self.brackets]}

    def save(self, stem) -> tuple[Path, Path]:
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        json_path = stem.with_suffix(".json")
        json_path.write_text(json.dumps(self.to_dict(), indent=2))
        csv_path = stem.with_suffix(".csv")
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", "tag", "exit_time"])
            for p in self.points:
                w.writerow([repr(p.y), p.tag, "" if p.outcome_time is None else repr(p.outcome_time)])
        return json_path, csv_path


def segment_points(cone: ConeParams, m: int, widen: bool = False) -> np.ndarray:
    half = cone.x0 if widen else cone.y_half_width
    y = half * np.linspace(-1.0, 1.0, m)
    # exact mirror symmetry keeps the y -> -y equivariance bit-for-bit
    return 0.5 * (y - y[::-1])


def _run_point(params, cone, path, y, opts):
    try:
        rec = simulate(params, cone, path, State(cone.x0, float(y)), opts)
    except Exception as exc:  # noqa: BLE001 - one bad point must not abort a scan
        log.warning("point y=%r failed: %s", y, exc)
        return PointResult(float(y), G, None, None, error=str(exc)), None
    return PointResult(float(y), tag_of(rec, cone.T), rec.outcome, rec.outcome_time), rec


def scan_segment(params: ModelParams, cone: ConeParams, path: NoisePath, m: int = 65,
                 opts: Optional[IntegratorOptions] = None, widen: bool = False,
                 keep_records: bool = False) -> SegmentClassification:
    if m < 2:
        raise ValueError("m must be >= 2")
    opts = opts or flow_options(cone)
    points, records = [], []
    for y in segment_points(cone, m, widen):
        p, rec = _run_point(params, cone, path, y, opts)
        points.append(p)
        records.append(rec if keep_records else None)
    brackets = [(a.y, b.y) for a, b in zip(points, points[1:]) if a.tag == B and b.tag == R]
    return SegmentClassification(cone.x0, points, brackets, records if keep_records else [])


@dataclass
class BisectionResult:
    y_star: float
    record: TrajectoryRecord
    history: list[dict]
    status: str  # "blowup", "survived", "unresolved"
    g_found: bool

    @property
    def resolved(self) -> bool:
        return self.status != "unresolved"

    @property
    def width(self) -> float:
        h = self.history[-1]
        return h["hi"] - h["lo"]

    def to_dict(self) -> dict:
        return {"y_star": self.y_star, "status": self.status, "g_found": self.g_found,
                "record": self.record.to_dict(), "history": self.history}


def bisect_exploding_point(params: ModelParams, cone: ConeParams, path: NoisePath,
                           tol: float = 1e-10, max_iter: int = 200,
                           bracket: Optional[tuple[float, float]] = None,
                           opts: Optional[IntegratorOptions] = None) -> BisectionResult:
    """Bisect a (B, R) bracket under one noise path until a G point shows up.

    A G midpoint that blew up ends the search at once. A G midpoint that left
    the cone after T still says which side of the boundary it lies on, so the
    bracket keeps shrinking; one that never left is returned as a survivor.
    The search otherwise stops at width <= tol * x0 or after max_iter midpoints
    and is then reported as unresolved.
    """
    opts = opts or flow_options(cone)
    if bracket is None:
        bracket = (-cone.y_half_width, cone.y_half_width)
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise BracketError("bracket must satisfy lo < hi")
    rec_lo = simulate(params, cone, path, State(cone.x0, lo), opts)
    rec_hi = simulate(params, cone, path, State(cone.x0, hi), opts)
    if tag_of(rec_lo, cone.T) != B or tag_of(rec_hi, cone.T) != R:
        raise BracketError(f"bracket ends tagged {tag_of(rec_lo, cone.T)}/{tag_of(rec_hi, cone.T)}, "
                           "need B below R")
    history = [{"lo": lo, "hi": hi, "mid": None, "tag": None}]
    g_found = False
    rec, mid = None, None
    for _ in range(max_iter):
        if hi - lo <= tol * cone.x0:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break  # floating-point resolution reached
        rec = simulate(params, cone, path, State(cone.x0, mid), opts)
        tag = tag_of(rec, cone.T)
        if tag == G:
            g_found = True
            if rec.outcome is Outcome.BLOWUP:
                history.append({"lo": lo, "hi": hi, "mid": mid, "tag": tag})
                return BisectionResult(mid, rec, history, "blowup", g_found)
            if rec.outcome is Outcome.SURVIVED:
                history.append({"lo": lo, "hi": hi, "mid": mid, "tag": tag})
                return BisectionResult(mid, rec, history, "survived", g_found)
            side = R if rec.outcome is Outcome.EXIT_UPPER else B
        else:
            side = tag
        if side == R:
            hi = mid
        else:
            lo = mid
        history.append({"lo": lo, "hi": hi, "mid": mid, "tag": tag})
    if rec is None:
        mid = 0.5 * (lo + hi)
        rec = simulate(params, cone, path, State(cone.x0, mid), opts)
    return BisectionResult(mid, rec, history, "unresolved", g_found)


@dataclass
class EventFlags:
    B1: bool
    B2: bool
    infX_ok: bool
    sup1: float
    sup2: float
    min_x: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_events(record: TrajectoryRecord, path: NoisePath, cone: ConeParams, sigma: float,
                 depth: int = 16) -> EventFlags:
    """Noise events B1 = {sigma sup|W1| <= c}, B2 = {sigma sup|W2| <= alpha x1 / 8} on [0, T],
    and whether the recorded X stayed >= x1 up to min(T, blow-up).

    Suprema are taken over a dyadic grid and so can only under-estimate the
    true ones; a grid-based flag may read True where the exact event fails.
    """
    T = cone.T
    sup1 = running_sup_abs(path, 1, T, depth)
    sup2 = running_sup_abs(path, 2, T, depth)
    t_stop = T
    if record.blowup_time is not None:
        t_stop = min(T, record.blowup_time)
    keep = record.t <= t_stop
    min_x = float(np.min(record.x[keep])) if np.any(keep) else float(record.initial.x)
    return EventFlags(
        B1=bool(sigma * sup1 <= cone.c),
        B2=bool(sigma * sup2 <= cone.alpha * cone.x1 / 8.0),
        infX_ok=bool(min_x >= cone.x1),
        sup1=sup1, sup2=sup2, min_x=min_x,
    )


@dataclass
class TrappingReport:
    status: str  # "pass", "fail", "vacuous", "precondition-failed"
    margin: float
    upper_checked: bool
    lower_checked: bool

    @property
    def ok(self) -> bool:
        return self.status != "fail"


def verify_trapping(record: TrajectoryRecord, cone: ConeParams, slack: Optional[float] = None,
                    flags: Optional[EventFlags] = None) -> TrappingReport:
    """Once Y reaches +(alpha/2) x1 it must stay above +(alpha/4) x1 until the cone exit
    (and symmetrically below); only meaningful while X stays >= x1 and the
    y-noise stays small, otherwise the report says the precondition failed.
    """
    if slack is None:
        eta = record.meta.get("options", {}).get("eta", 1e-2)
        slack = 2.0 * eta * cone.x1
    level = 0.25 * cone.alpha * cone.x1
    tau = record.tau
    t_stop = tau if tau is not None else (record.outcome_time or float(record.t[-1]))
    nu_p = record.events.get("nu_plus")
    nu_m = record.events.get("nu_minus")
    if nu_p is None and nu_m is None:
        return TrappingReport("vacuous", math.inf, False, False)

    keep = record.t <= min(t_stop, cone.T)
    min_x = float(np.min(record.x[keep])) if np.any(keep) else record.initial.x
    if min_x < cone.x1 or (flags is not None and not (flags.B2 and flags.infX_ok)):
        return TrappingReport("precondition-failed", math.nan, False, False)

    margin = math.inf
    upper = lower = False
    if nu_p is not None and nu_p <= t_stop:
        sel = (record.t >= nu_p) & (record.t <= t_stop)
        if np.any(sel):
            margin = min(margin, float(np.min(record.y[sel])) - level)
            upper = True
    if nu_m is not None and nu_m <= t_stop:
        sel = (record.t >= nu_m) & (record.t <= t_stop)
        if np.any(sel):
            margin = min(margin, -level - float(np.max(record.y[sel])))
            lower = True
    if not (upper or lower):
        return TrappingReport("vacuous", math.inf, False, False)
    return TrappingReport("pass" if margin >= -slack else "fail", margin, upper, lower)
