"""Adaptive Euler-Maruyama for one trajectory under a fixed noise path.

Step rule: h = min(h_max, eta * max(1, |z|) / (1 + |z|**n)), so the drift
moves the state by at most about ``eta`` relative to its size per step and
the step count to blow-up radius R grows like log(R) / eta.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels as K
from .drift import ConeParams, ModelParams, State
from .noise import NoisePath, NoiseRangeError


class Outcome(enum.Enum):
    SURVIVED = "Survived"
    EXIT_UPPER = "ExitUpper"
    EXIT_LOWER = "ExitLower"
    BLOWUP = "BlowUp"


_OUTCOME_CODES = {
    K.OUT_SURVIVED: Outcome.SURVIVED,
    K.OUT_EXIT_UPPER: Outcome.EXIT_UPPER,
    K.OUT_EXIT_LOWER: Outcome.EXIT_LOWER,
    K.OUT_BLOWUP: Outcome.BLOWUP,
}

EVENT_NAMES = ("tau_upper", "tau_lower", "nu_plus", "nu_minus")


@dataclass(frozen=True)
class IntegratorOptions:
    """Step control and stopping rules.

    ``eta`` is a relative drift budget (dimensionless): one step moves the
    state by at most about ``eta * max(1, |z|)`` through the drift.
    """

    t_end: float
    h_max: float = 1e-2
    eta: float = 1e-2
    R_blow: float = 1e6
    record_stride: int = 1
    classify: bool = True
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not self.h_max > 0:
            raise ValueError("h_max must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.t_end > 0 or not math.isfinite(self.t_end):
            raise ValueError("t_end must be positive and finite")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @classmethod
    def for_cone(cls, cone: ConeParams, t_end: Optional[float] = None, **overrides):
        """Defaults tied to the cone: h_max = T/1000, R_blow = 1e6 * x0, t_end = 2T."""
        kw = dict(t_end=2.0 * cone.T if t_end is None else t_end,
                  h_max=cone.T / 1000, eta=1e-2, R_blow=1e6 * cone.x0)
        kw.update(overrides)
        return cls(**kw)

    def replace(self, **changes) -> "IntegratorOptions":
        return replace(self, **changes)


@dataclass
class TrajectoryRecord:
    initial: State
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    outcome: Outcome
    outcome_time: Optional[float]
    events: dict = field(default_factory=dict)
    overflow: bool = False
    step_limited: bool = False
    n_steps: int = 0
    max_step_ratio: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def samples(self) -> list[tuple[float, State]]:
        return [(float(t), State(float(x), float(y))) for t, x, y in zip(self.t, self.x, self.y)]

    @property
    def final(self) -> State:
        return State(float(self.x[-1]), float(self.y[-1]))

    @property
    def tau(self) -> Optional[float]:
        """Cone exit time min(tau_upper, tau_lower), None if neither happened."""
        times = [self.events.get(k) for k in ("tau_upper", "tau_lower")]
        times = [v for v in times if v is not None]
        return min(times) if times else None

    @property
    def blowup_time(self) -> Optional[float]:
        return self.outcome_time if self.outcome is Outcome.BLOWUP else None

    def to_dict(self) -> dict:
        return {
            "initial": {"x": self.initial.x, "y": self.initial.y},
            "outcome": self.outcome.value,
            "outcome_time": self.outcome_time,
            "events": dict(self.events),
            "overflow": self.overflow,
            "step_limited": self.step_limited,
            "n_steps": self.n_steps,
            "max_step_ratio": self.max_step_ratio,
            "n_samples": int(self.t.size),
            **self.meta,
        }

    def save(self, stem) -> tuple[Path, Path]:
        """Write ``<stem>.csv`` (t,x,y) and the ``<stem>.json`` sidecar."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        csv_path = stem.with_suffix(".csv")
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y"])
            for row in zip(self.t, self.x, self.y):
                w.writerow([repr(float(v)) for v in row])
        json_path = stem.with_suffix(".json")
        json_path.write_text(json.dumps(self.to_dict(), indent=2))
        return csv_path, json_path


def simulate(params: ModelParams, cone: Optional[ConeParams], path: NoisePath,
             z0: State, opts: IntegratorOptions, t0: float = 0.0) -> TrajectoryRecord:
    """Integrate from z0 at time t0 until blow-up, cone exit or ``opts.t_end``.

    Blow-up is declared when |z| >= R_blow; its time is linearly
    interpolated in |z| over the last step. Cone exits (y = +-alpha*x) and the
    levels y = +-(alpha/2) x1 are located by linear interpolation of the signed
    distance. Without a cone no event times are tracked and nothing exits.
    A non-finite state is reported as BlowUp at the last finite time with
    ``overflow`` set.
    """
    z0 = State(float(z0[0]), float(z0[1]))
    if not (math.isfinite(z0.x) and math.isfinite(z0.y)):
        raise ValueError("initial state must be finite")
    if opts.R_blow < 1e3 * max(1.0, abs(z0.x)):
        raise ValueError("R_blow must be at least 1e3 times the initial abscissa")
    if opts.t_end > path.horizon:
        raise NoiseRangeError(f"t_end = {opts.t_end} exceeds the noise horizon {path.horizon}")
    if not 0 <= t0 <= opts.t_end:
        raise ValueError("t0 must lie in [0, t_end]")
    binom, cj, ck, cre, cim = params.kernel_arrays()
    classify = bool(opts.classify and cone is not None)
    alpha = cone.alpha if cone is not None else 0.0
    x1 = cone.x1 if cone is not None else 0.0
    kind, seed, horizon, depth, tab_t, tab_w = path.kernel_args()
    (ts, xs, ys, code, out_t, events, overflow, step_limited, steps,
     ratio) = K.integrate(params.n, binom, cj, ck, cre, cim, params.sigma,
                          z0.x, z0.y, float(t0), float(opts.t_end), float(opts.h_max),
                          float(opts.eta), float(opts.R_blow), classify, alpha, x1,
                          int(opts.record_stride), int(opts.max_steps),
                          kind, seed, horizon, depth, tab_t, tab_w)
    ev = {}
    if cone is not None:
        ev = {name: (None if np.isnan(v) else float(v)) for name, v in zip(EVENT_NAMES, events)}
    outcome = _OUTCOME_CODES[int(code)]
    return TrajectoryRecord(
        initial=z0, t=ts, x=xs, y=ys, outcome=outcome,
        outcome_time=None if outcome is Outcome.SURVIVED else float(out_t),
        events=ev, overflow=bool(overflow), step_limited=bool(step_limited),
        n_steps=int(steps), max_step_ratio=float(ratio),
        meta={"options": asdict(opts), "t0": float(t0), "noise": path.describe()},
    )


def gronwall_floor(cone: ConeParams, t: float) -> float:
    """Lower bound x1 / (1 - (eps/2)(n-1) x1^(n-1) t)^(1/(n-1)) for X_t in the cone."""
    if not 0 <= t < cone.T:
        raise ValueError(f"floor is only defined on [0, T) = [0, {cone.T})")
    n, x1 = cone.n, cone.x1
    return x1 / (1.0 - 0.5 * cone.epsilon * (n - 1) * x1 ** (n - 1) * t) ** (1.0 / (n - 1))
