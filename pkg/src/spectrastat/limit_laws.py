"""Closed-form limiting spectral densities and extreme-eigenvalue limits.

Three laws: the Marcenko-Pastur family for white sample covariances, the
standard semicircle for the p/n -> 0 regime, and the F-matrix LSD for
ratios of independent sample covariances.  All densities have square-root
edges; integrals against them use the substitution x = a + (b-a) sin^2(t),
which removes both endpoint singularities and restores spectral
convergence of the quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate

from .errors import InputError, NumericalError


def sqrt_edge_integral(smooth: Callable[[np.ndarray], np.ndarray], a: float,
                       b: float, epsabs: float = 1e-8, limit: int = 200) -> float:
    """Integral of smooth(x) * sqrt((b-x)(x-a)) over [a, b].

    The square-root factor is substituted analytically: with
    x = a + (b-a) sin^2(t) it equals (b-a) sin(t) cos(t).
    """

    def g(t):
        s, c = np.sin(t), np.cos(t)
        x = a + (b - a) * s * s
        w = (b - a) * s * c
        return smooth(x) * w * 2.0 * (b - a) * s * c

    val, err = integrate.quad(g, 0.0, np.pi / 2.0, epsabs=epsabs, limit=limit)
    if not np.isfinite(val) or err > max(epsabs * 10.0, 1e-6 * abs(val)):
        raise NumericalError(
            f"edge quadrature did not converge (estimate {val}, error {err})")
    return val


class ExtremeLimits(NamedTuple):
    """Almost-sure limits of the extreme eigenvalues; lambda_min is None
    when the aspect ratio makes the smallest eigenvalue degenerate."""

    lambda_min: Optional[float]
    lambda_max: float


@dataclass(frozen=True)
class MPLaw:
    """Marcenko-Pastur law with aspect ratio gamma = lim p/n and entry
    variance sigma2.

    Support edges are (1 +- sqrt(gamma))^2 * sigma2.  For gamma > 1 the law
    is a mixture of a point mass 1 - 1/gamma at zero and a continuous part
    of total mass 1/gamma; the continuous density is the same closed form
    as for gamma <= 1 (it then integrates to 1/gamma).
    """

    gamma: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0):
            raise InputError(f"gamma must be positive, got {self.gamma}")
        if not (self.sigma2 > 0):
            raise InputError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def support(self) -> tuple:
        g, s2 = self.gamma, self.sigma2
        return ((1 - np.sqrt(g)) ** 2 * s2, (1 + np.sqrt(g)) ** 2 * s2)

    @property
    def point_mass_at_zero(self) -> float:
        return max(0.0, 1.0 - 1.0 / self.gamma)

    def pdf(self, x):
        """Continuous density (excludes the atom at zero when gamma > 1)."""
        x = np.asarray(x, dtype=float)
        g, s2 = self.gamma, self.sigma2
        lo, hi = self.support
        out = np.zeros_like(x)
        inside = (x > lo) & (x < hi) & (x > 0)
        xi = x[inside]
        out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2.0 * np.pi * g * s2 * xi)
        return out if out.ndim else float(out)

    def cdf(self, x):
        """Distribution function, including the atom at zero for gamma > 1."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.support
        atom = self.point_mass_at_zero
        out = np.empty_like(xs)
        for i, xi in enumerate(xs):
            if xi < 0:
                out[i] = 0.0
            elif xi <= lo:
                out[i] = atom
            elif xi >= hi:
                out[i] = 1.0
            else:
                mass = sqrt_edge_integral(
                    lambda t: 1.0 / (2.0 * np.pi * self.gamma * self.sigma2 * t),
                    lo, min(xi, hi), epsabs=1e-10)
                out[i] = atom + mass
        out = np.clip(out, 0.0, 1.0)
        return out if np.ndim(x) else float(out[0])


@dataclass(frozen=True)
class SemicircleLaw:
    """Standardized semicircle: density sqrt(4 - x^2) / (2 pi) on [-2, 2]."""

    @property
    def support(self) -> tuple:
        return (-2.0, 2.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 2.0
        out[inside] = np.sqrt(4.0 - x[inside] ** 2) / (2.0 * np.pi)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, -2.0, 2.0)
        out = 0.5 + xc * np.sqrt(4.0 - xc ** 2) / (4.0 * np.pi) \
            + np.arcsin(xc / 2.0) / np.pi
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class FMatrixLSD:
    """Limiting spectral distribution of S1 * S2^{-1} for independent white
    sample covariances with p/n1 -> gamma1 and p/n2 -> gamma2 in (0, 1).

    h = sqrt(gamma1 + gamma2 - gamma1*gamma2); the support is
    [((1-h)/(1-gamma2))^2, ((1+h)/(1-gamma2))^2].  A point mass 1 - 1/gamma1
    sits at the origin iff gamma1 > 1.
    """

    gamma1: float
    gamma2: float

    def __post_init__(self):
        if not (self.gamma1 > 0):
            raise InputError(f"gamma1 must be positive, got {self.gamma1}")
        if not (0 < self.gamma2 < 1):
            raise InputError(f"gamma2 must lie in (0, 1), got {self.gamma2}")

    @property
    def h(self) -> float:
        return float(np.sqrt(self.gamma1 + self.gamma2 - self.gamma1 * self.gamma2))

    @property
    def support(self) -> tuple:
        h = self.h
        d = (1.0 - self.gamma2) ** 2
        return ((1.0 - h) ** 2 / d, (1.0 + h) ** 2 / d)

    @property
    def point_mass_at_zero(self) -> float:
        return max(0.0, 1.0 - 1.0 / self.gamma1)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.support
        g1, g2 = self.gamma1, self.gamma2
        out = np.zeros_like(x)
        inside = (x > a) & (x < b)
        xi = x[inside]
        out[inside] = (1.0 - g2) * np.sqrt((b - xi) * (xi - a)) / (
            2.0 * np.pi * xi * (g1 + xi * g2))
        return out if out.ndim else float(out)

    def cdf(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        a, b = self.support
        g1, g2 = self.gamma1, self.gamma2
        atom = self.point_mass_at_zero
        out = np.empty_like(xs)
        for i, xi in enumerate(xs):
            if xi < 0:
                out[i] = 0.0
            elif xi <= a:
                out[i] = atom
            elif xi >= b:
                out[i] = 1.0
            else:
                mass = sqrt_edge_integral(
                    lambda t: (1.0 - g2) / (2.0 * np.pi * t * (g1 + t * g2)),
                    a, xi, epsabs=1e-10)
                out[i] = atom + mass
        out = np.clip(out, 0.0, 1.0)
        return out if np.ndim(x) else float(out[0])


def mp_pdf(law: MPLaw, x):
    """Marcenko-Pastur density at x (continuous part only)."""
    return law.pdf(x)


def mp_cdf(law: MPLaw, x):
    """Marcenko-Pastur CDF at x, atom at zero included for gamma > 1."""
    return law.cdf(x)


def semicircle_pdf(x):
    """Semicircle density sqrt(4 - x^2) / (2 pi) on [-2, 2]."""
    return SemicircleLaw().pdf(x)


def f_lsd_pdf(law: FMatrixLSD, x):
    """F-matrix LSD density at x (continuous part only)."""
    return law.pdf(x)


def extreme_eigen_limits(law: MPLaw) -> ExtremeLimits:
    """Almost-sure limits of the smallest/largest sample eigenvalues.

    The smallest-eigenvalue limit only holds for gamma < 1; for gamma >= 1
    it is reported as unavailable (None).
    """
    g, s2 = law.gamma, law.sigma2
    lam_max = (1.0 + np.sqrt(g)) ** 2 * s2
    lam_min = (1.0 - np.sqrt(g)) ** 2 * s2 if g < 1 else None
    return ExtremeLimits(lam_min, float(lam_max))


def f_lsd_integral(law: FMatrixLSD, g: Callable, epsabs: float = 1e-8) -> float:
    """Integral of g against the continuous part of the F-matrix LSD.

    Adaptive quadrature after the sin^2 substitution that kills both
    square-root edges; absolute tolerance ``epsabs``.
    """
    a, b = law.support
    g1, g2 = law.gamma1, law.gamma2

    def smooth(x):
        return np.asarray(g(x), dtype=float) * (1.0 - g2) / (
            2.0 * np.pi * x * (g1 + x * g2))

    return sqrt_edge_integral(smooth, a, b, epsabs=epsabs)


def law_curve(law, kind: str = "pdf", lo: Optional[float] = None,
              hi: Optional[float] = None, num: int = 512):
    """Sample a law's pdf or cdf on a regular grid, for CSV export."""
    a, b = law.support
    pad = 0.05 * (b - a)
    lo = a - pad if lo is None else lo
    hi = b + pad if hi is None else hi
    xs = np.linspace(lo, hi, num)
    if kind == "pdf":
        ys = law.pdf(xs)
    elif kind == "cdf":
        ys = law.cdf(xs)
    else:
        raise InputError(f"kind must be 'pdf' or 'cdf', got {kind!r}")
    return xs, np.asarray(ys, dtype=float)
