"""Drift field of dZ = (Z^n + F(Z)) dt + sigma dB in Cartesian form, and the
cone constants used by the explosion argument.

The drift is available two ways: as the alternating binomial sums
(valid everywhere) and in polar closed form (valid for x > 0). The two are
kept independent so each can check the other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np
from scipy.optimize import bisect


class DriftOverflow(ArithmeticError):
    """Drift evaluation left the representable range (evidence of blow-up)."""


class ParameterError(ValueError):
    pass


class DomainError(ValueError):
    pass


class State(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class ModelParams:
    """Exponent n, noise intensity sigma and the perturbation F.

    ``f_coeffs`` maps ``(j, k)`` to the complex coefficient of z^j conj(z)^k.
    """

    n: int
    sigma: float = 0.0
    f_coeffs: Mapping[tuple[int, int], complex] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"n must be an integer >= 2, got {self.n!r}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ParameterError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        coeffs = {}
        for key in sorted(self.f_coeffs):
            j, k = key
            c = complex(self.f_coeffs[key])
            if j < 0 or k < 0 or j + k > self.n - 1:
                raise ParameterError(
                    f"coefficient ({j}, {k}) violates 0 <= j, k and j + k <= n - 1 = {self.n - 1}")
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise ParameterError(f"coefficient ({j}, {k}) is not finite")
            coeffs[(int(j), int(k))] = c
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "f_coeffs", coeffs)

    @property
    def coeff_sum(self) -> float:
        return float(sum(abs(c) for c in self.f_coeffs.values()))

    def with_sigma(self, sigma: float) -> "ModelParams":
        return ModelParams(self.n, sigma, self.f_coeffs)

    def kernel_arrays(self):
        """(binomials, j, k, re, im) arrays in the layout the compiled kernels take."""
        binom = np.array([math.comb(self.n, i) for i in range(self.n + 1)], dtype=float)
        keys = list(self.f_coeffs)  # already sorted
        cj = np.array([j for j, _ in keys], dtype=np.int64)
        ck = np.array([k for _, k in keys], dtype=np.int64)
        cre = np.array([self.f_coeffs[key].real for key in keys], dtype=float)
        cim = np.array([self.f_coeffs[key].imag for key in keys], dtype=float)
        return binom, cj, ck, cre, cim


def perturbation(params: ModelParams, s: State):
    """Real and imaginary parts of F at (x, y); works on scalars or arrays."""
    x = np.asarray(s.x, dtype=float)
    y = np.asarray(s.y, dtype=float)
    if not params.f_coeffs:
        zero = np.zeros(np.broadcast(x, y).shape)
        return _unwrap(zero), _unwrap(zero)
    z = x + 1j * y
    zb = np.conj(z)
    total = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    for (j, k), c in params.f_coeffs.items():
        total = total + c * z ** j * zb ** k
    return _unwrap(total.real), _unwrap(total.imag)


def _unwrap(a):
    return float(a) if np.ndim(a) == 0 else a


def _check_finite(bx, by):
    if not (np.all(np.isfinite(bx)) and np.all(np.isfinite(by))):
        raise DriftOverflow("drift is not finite")
    return bx, by


def drift_binomial(params: ModelParams, s: State):
    """Drift from the alternating binomial sums plus (Re F, Im F).

    Raises :class:`DriftOverflow` when the result is not finite.
    """
    n = params.n
    x = np.asarray(s.x, dtype=float)
    y = np.asarray(s.y, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        b1 = sum((-1) ** j * math.comb(n, 2 * j) * x ** (n - 2 * j) * y ** (2 * j)
                 for j in range(n // 2 + 1))
        b2 = sum((-1) ** j * math.comb(n, 2 * j + 1) * x ** (n - 2 * j - 1) * y ** (2 * j + 1)
                 for j in range((n - 1) // 2 + 1))
        f1, f2 = perturbation(params, s)
        bx = b1 + f1
        by = b2 + f2
    return _check_finite(_unwrap(bx), _unwrap(by))


def drift_polar(params: ModelParams, s: State):
    """Drift as r^n (cos(n*phi), sin(n*phi)) + (Re F, Im F), phi = arctan(y/x).

    Only defined for x > 0; raises :class:`DomainError` otherwise.
    """
    x = np.asarray(s.x, dtype=float)
    y = np.asarray(s.y, dtype=float)
    if np.any(x <= 0):
        raise DomainError("polar drift needs x > 0; use drift_binomial")
    n = params.n
    with np.errstate(over="ignore", invalid="ignore"):
        rn = (x * x + y * y) ** (n / 2)
        phi = np.arctan(y / x)
        f1, f2 = perturbation(params, s)
        bx = rn * np.cos(n * phi) + f1
        by = rn * np.sin(n * phi) + f2
    return _check_finite(_unwrap(bx), _unwrap(by))


def max_alpha(n: int) -> float:
    return math.tan(math.pi / (2 * n))


def epsilon_of(n: int, alpha: float) -> float:
    """Infimum of cos(n*arctan(y/x)) over the cone |y| <= alpha*x."""
    if not 0 < alpha < max_alpha(n):
        raise ParameterError(f"alpha must lie in (0, tan(pi/(2n))) = (0, {max_alpha(n):.6g})")
    return math.cos(n * math.atan(alpha))


def x_star_of(params: ModelParams, epsilon: float) -> tuple[float, float]:
    """Cone entry abscissa and perturbation constant ``(x_star, C)``.

    With S the sum of |c_jk|, |F(z)| <= S |z|^(n-1) once |z| >= 1, so
    x_star = max(1, 2S/epsilon) keeps |Re F| below (epsilon/2) r^n in the cone.
    """
    if not 0 < epsilon <= 1:
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    s = params.coeff_sum
    return max(1.0, 2.0 * s / epsilon), s


def sine_constants(n: int, xtol: float = 1e-12) -> tuple[float, float]:
    """Smallest positive root b_n of sin(n*arctan z) = z, and a_n = sin(n*arctan b_n)."""
    if n < 2:
        raise ParameterError("n must be >= 2")

    def g(z):
        return math.sin(n * math.atan(z)) - z

    lo = 1e-8
    hi = 4.0 * math.tan(math.pi / (2 * n))
    for _ in range(64):
        if g(hi) < 0:
            break
        hi *= 2.0
    else:
        raise ArithmeticError(f"could not bracket the root of sin({n} arctan z) - z")
    if g(lo) <= 0:
        raise ArithmeticError("g is not positive at the left bracket end")
    b = bisect(g, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    return b, math.sin(n * math.atan(b))


@dataclass(frozen=True)
class ConeParams:
    """Cone |y| <= alpha*x, x >= x_star together with the derived constants."""

    n: int
    alpha: float
    x_star: float
    c: float
    x0: float
    epsilon: float
    C: float
    a_n: float
    b_n: float

    @classmethod
    def build(cls, params: ModelParams, alpha: float, c: float, x0: float,
              epsilon: float | None = None) -> "ConeParams":
        eps_sharp = epsilon_of(params.n, alpha)
        if epsilon is None:
            epsilon = eps_sharp
        elif not 0 < epsilon <= eps_sharp:
            raise ParameterError("a custom epsilon must lie in (0, cos(n*arctan(alpha))]")
        x_star, C = x_star_of(params, epsilon)
        b_n, a_n = sine_constants(params.n)
        return cls(params.n, float(alpha), x_star, float(c), float(x0), epsilon, C, a_n, b_n)

    def __post_init__(self):
        if not 0 < self.alpha < max_alpha(self.n):
            raise ParameterError("alpha must lie in (0, tan(pi/(2n)))")
        if not self.c > 0:
            raise ParameterError("c must be > 0")
        if not self.x0 > self.x_star + self.c:
            raise ParameterError(
                f"x0 = {self.x0} must exceed x_star + c = {self.x_star + self.c}")
        if not 0 < self.epsilon <= 1:
            raise ParameterError("epsilon must lie in (0, 1]")
        if not (0 < self.b_n and 0 < self.a_n <= 1):
            raise ParameterError("invalid sine constants")

    @property
    def x1(self) -> float:
        return self.x0 - self.c

    @property
    def T(self) -> float:
        """Upper bound for the explosion time of cone-trapped trajectories."""
        return 1.0 / (0.5 * self.epsilon * (self.n - 1) * self.x1 ** (self.n - 1))

    @property
    def y_half_width(self) -> float:
        """Half-length of the initial segment {x0} x [-tan(pi/2n) x0, tan(pi/2n) x0]."""
        return max_alpha(self.n) * self.x0

    def as_dict(self) -> dict:
        return {"n": self.n, "alpha": self.alpha, "x_star": self.x_star, "c": self.c,
                "x0": self.x0, "x1": self.x1, "epsilon": self.epsilon, "T": self.T,
                "C": self.C, "a_n": self.a_n, "b_n": self.b_n}


def in_cone(cone: ConeParams, s: State) -> bool:
    return s.x >= cone.x_star and abs(s.y) <= cone.alpha * s.x
