"""Noise realizations shared by every initial condition of a flow.

A :class:`BrownianPath` is one fixed omega of the planar Brownian motion
(W1, W2). Values on the dyadic grid horizon * k / 2**d come from the
midpoint (bridge) construction, and each node's Gaussian is drawn from a
counter-based hash of (seed, component, depth, index). Nothing is stored:
any query recomputes the same ancestors, so answers never depend on query
order and a path can be shared freely between workers.

Off-grid times at ``max_depth`` are linearly interpolated between the two
neighbouring grid values; the induced error is O(resolution) in value and
invisible to the integrator whenever steps are far above
``horizon * 2**-max_depth``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from . import _kernels as K

_MASK = (1 << 64) - 1
_EMPTY_T = np.zeros(1)
_EMPTY_W = np.zeros((2, 1))


class NoiseRangeError(ValueError):
    pass


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


@dataclass(frozen=True)
class BrownianPath:
    seed: int
    horizon: float = 1.0
    max_depth: int = 32

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not 1 <= self.max_depth <= 52:
            raise ValueError("max_depth must lie in [1, 52]")
        object.__setattr__(self, "seed", int(self.seed) & _MASK)

    def kernel_args(self):
        return (K.NOISE_BROWNIAN, np.uint64(self.seed), float(self.horizon),
                int(self.max_depth), _EMPTY_T, _EMPTY_W)

    def describe(self) -> dict:
        return {"kind": "brownian", "seed": self.seed, "horizon": self.horizon,
                "max_depth": self.max_depth}


@dataclass(frozen=True)
class ZeroPath:
    """W = 0: the deterministic ODE."""

    horizon: float = np.inf

    def kernel_args(self):
        return (K.NOISE_ZERO, np.uint64(0), 1.0, 1, _EMPTY_T, _EMPTY_W)

    def describe(self) -> dict:
        return {"kind": "zero"}


@dataclass(frozen=True)
class TabulatedPath:
    """User-supplied samples of (W1, W2), linearly interpolated in time."""

    times: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape != (2, times.size):
            raise ValueError("values must have shape (2, len(times))")
        if times.size < 1 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if np.any(values[:, 0] != 0.0):
            raise ValueError("a noise path must start at 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", np.ascontiguousarray(values))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @classmethod
    def from_csv(cls, path1, path2) -> "TabulatedPath":
        """Read one two-column ``time,value`` CSV per component (shared time grid)."""
        t1, w1 = _read_two_columns(path1)
        t2, w2 = _read_two_columns(path2)
        if not np.array_equal(t1, t2):
            raise ValueError("both components must use the same time grid")
        return cls(t1, np.vstack([w1, w2]))

    def kernel_args(self):
        return (K.NOISE_TABULATED, np.uint64(0), self.horizon, 1, self.times, self.values)

    def describe(self) -> dict:
        return {"kind": "tabulated", "n_samples": int(self.times.size), "horizon": self.horizon}


NoisePath = Union[BrownianPath, ZeroPath, TabulatedPath]


def _read_two_columns(path):
    rows = []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
                continue  # header line
    arr = np.array(rows, dtype=float)
    return arr[:, 0], arr[:, 1]


def _check_time(path: NoisePath, t: float):
    if not 0 <= t <= path.horizon:
        raise NoiseRangeError(f"t = {t} outside [0, {path.horizon}]")


def sample(path: NoisePath, component: int, t: float) -> float:
    """W^(component)(t), component in {1, 2}."""
    if component not in (1, 2):
        raise ValueError("component must be 1 or 2")
    _check_time(path, t)
    kind, seed, horizon, depth, tab_t, tab_w = path.kernel_args()
    return float(K.noise_value(kind, component - 1, float(t), seed, horizon, depth, tab_t, tab_w))


def grid_values(path: NoisePath, component: int, depth: int, t_end: float | None = None):
    """(times, values) on the dyadic grid of the given depth, restricted to [0, t_end]."""
    if component not in (1, 2):
        raise ValueError("component must be 1 or 2")
    if isinstance(path, BrownianPath):
        if depth > path.max_depth:
            raise ValueError("depth exceeds the path's max_depth")
        values = K.bridge_level(np.uint64(path.seed), component - 1, path.horizon, int(depth))
        times = path.horizon * np.arange(values.size) / 2.0 ** depth
    elif isinstance(path, TabulatedPath):
        times = path.horizon * np.arange(2 ** depth + 1) / 2.0 ** depth
        values = np.interp(times, path.times, path.values[component - 1])
    else:
        times = np.array([0.0])
        values = np.zeros(1)
    if t_end is not None:
        keep = times <= t_end
        times, values = times[keep], values[keep]
    return times, values


def running_sup_abs(path: NoisePath, component: int, t_end: float, depth: int = 16) -> float:
    """max |W(t)| over dyadic grid points of the given depth in [0, t_end].

    This is a grid supremum, hence never above the true supremum.
    """
    _check_time(path, t_end)
    _, values = grid_values(path, component, depth, t_end)
    return float(np.max(np.abs(values)))


def fork_replicate(master_seed: int, replicate_index: int, horizon: float = 1.0,
                   max_depth: int = 32) -> BrownianPath:
    """Independent path for one replicate, derived by counter-based mixing."""
    sub = _mix64(_mix64(int(master_seed) ^ 0x243F6A8885A308D3)
                 + (int(replicate_index) + 1) * 0x9E3779B97F4A7C15)
    return BrownianPath(sub, horizon, max_depth)
