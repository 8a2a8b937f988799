"""Tracy-Widom F1 evaluation and centering/scaling constant families.

The order-1 distribution function is
    F1(s) = exp(-1/2 * integral_s^inf [q(x) + (x - s) q(x)^2] dx)
where q is the Hastings-McLeod solution of Painleve II,
q'' = x q + 2 q^3 with q(x) ~ Ai(x) as x -> +inf.

The solver integrates leftward with fixed-step classical RK4.  The
Hastings-McLeod branch is a separatrix: it is stable leftward and
violently unstable rightward, and perturbations committed near the origin
are amplified by roughly exp((2 sqrt 2 / 3) |x|^{3/2}) by the time the
integration reaches x.  Reaching step-halving agreement of 1e-7 at x = -8
therefore needs both a small step (truncation is amplified like any other
perturbation) and extended-precision arithmetic (the float64 roundoff
floor at -8 is about 1e-6).  We integrate in numpy longdouble with a
default step of 1e-4; on platforms where longdouble is an alias for
float64 the solver still runs but the reproducibility guarantee degrades.

Airy initial values come from the convergent Maclaurin two-series form of
Ai, evaluated in mpmath arbitrary precision (the series suffers
catastrophic cancellation for x beyond ~4 in double precision).
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, InputError, NumericalError, PreconditionError

TABLE_VERSION = "spectrastat-tw1-table v1"

# Reference quantiles of the order-1 law at standard probability levels,
# used by `verify` as anchors (values rounded to two decimals).
TW1_REFERENCE_QUANTILES = {
    0.01: -3.90, 0.05: -3.18, 0.10: -2.78, 0.30: -1.91, 0.50: -1.27,
    0.70: -0.59, 0.90: 0.45, 0.95: 0.98, 0.99: 2.02,
}


def airy_ai_maclaurin(x: float, dps: int = 60) -> tuple:
    """(Ai(x), Ai'(x)) from the two-series Maclaurin form.

    Ai(x) = c1 f(x) - c2 g(x) with
      f(x) = sum 3^k (1/3)_k x^{3k} / (3k)!,
      g(x) = sum 3^k (2/3)_k x^{3k+1} / (3k+1)!,
      c1 = 3^{-2/3} / Gamma(2/3),  c2 = 3^{-1/3} / Gamma(1/3).

    Both series converge everywhere but cancel catastrophically for
    moderate positive x, so terms are accumulated in mpmath at ``dps``
    digits and rounded to float at the end.
    """
    with mpmath.workdps(dps):
        xm = mpmath.mpf(x)
        x3 = xm ** 3
        c1 = mpmath.power(3, mpmath.mpf(-2) / 3) / mpmath.gamma(mpmath.mpf(2) / 3)
        c2 = mpmath.power(3, mpmath.mpf(-1) / 3) / mpmath.gamma(mpmath.mpf(1) / 3)
        # f-series terms t_k = prod_{j<k}(3j+1) x^{3k}/(3k)!; ratio x^3/((3k+2)(3k+3))
        # g-series terms s_k = prod_{j<k}(3j+2) x^{3k+1}/(3k+1)!; ratio x^3/((3k+3)(3k+4))
        t = mpmath.mpf(1)
        s = xm
        f_sum, g_sum = t, s
        fp_sum = mpmath.mpf(0)          # f'(x): term t_k * 3k / x
        gp_sum = mpmath.mpf(1)          # g'(x): term s_k * (3k+1) / x, k=0 gives 1
        k = 0
        tol = mpmath.mpf(10) ** (-(dps - 5))
        while True:
            t = t * x3 / ((3 * k + 2) * (3 * k + 3))
            s = s * x3 / ((3 * k + 3) * (3 * k + 4))
            k += 1
            f_sum += t
            g_sum += s
            fp_sum += t * (3 * k) / xm if xm != 0 else mpmath.mpf(0)
            gp_sum += s * (3 * k + 1) / xm if xm != 0 else mpmath.mpf(0)
            if abs(t) < tol * (1 + abs(f_sum)) and abs(s) < tol * (1 + abs(g_sum)):
                break
            if k > 10_000:  # pragma: no cover
                raise NumericalError("Airy Maclaurin series failed to terminate")
        if xm == 0:
            fp_sum, gp_sum = mpmath.mpf(0), mpmath.mpf(1)
        ai = c1 * f_sum - c2 * g_sum
        aip = c1 * fp_sum - c2 * gp_sum
        return float(ai), float(aip)


@dataclass(frozen=True)
class Painleve2Solution:
    """Hastings-McLeod solution samples on a descending grid."""

    grid: np.ndarray       # descending abscissae, float64
    q_values: np.ndarray
    q_prime_values: np.ndarray
    x_right: float
    x_left: float
    step: float

    def __post_init__(self):
        if np.any(np.diff(self.grid) >= 0):
            raise InputError("Painleve grid must be strictly descending")


def solve_painleve2(x_right: float = 6.0, x_left: float = -8.0,
                    step: float = 1e-4) -> Painleve2Solution:
    """Integrate q'' = x q + 2 q^3 leftward from Airy initial data.

    Initial condition q(x_right) = Ai(x_right), q'(x_right) = Ai'(x_right);
    fixed-step classical RK4 in longdouble.  Raises NumericalError with the
    abscissa of failure if the solution leaves the stable branch
    (|q| > 1e6).
    """
    if x_right < 5.0:
        raise PreconditionError("x_right must be >= 5 (Airy asymptotic regime)")
    if x_left > -8.0:
        raise PreconditionError("x_left must be <= -8")
    if step > 0.01 or step <= 0:
        raise PreconditionError("step must lie in (0, 0.01]")

    ld = np.longdouble
    ai, aip = airy_ai_maclaurin(x_right)
    nsteps = int(round((x_right - x_left) / step))
    h = -ld(x_right - x_left) / ld(nsteps)
    half = ld(0.5)
    two = ld(2.0)
    sixth = ld(1.0) / ld(6.0)

    q = ld(ai)
    qp = ld(aip)
    x0 = ld(x_right)
    qs = np.empty(nsteps + 1, dtype=ld)
    qps = np.empty(nsteps + 1, dtype=ld)
    qs[0] = q
    qps[0] = qp
    for i in range(nsteps):
        x = x0 + ld(i) * h
        k1q = qp
        k1p = x * q + two * q * q * q
        xm = x + half * h
        q2 = q + half * h * k1q
        p2 = qp + half * h * k1p
        k2q = p2
        k2p = xm * q2 + two * q2 * q2 * q2
        q3 = q + half * h * k2q
        p3 = qp + half * h * k2p
        k3q = p3
        k3p = xm * q3 + two * q3 * q3 * q3
        xe = x + h
        q4 = q + h * k3q
        p4 = qp + h * k3p
        k4q = p4
        k4p = xe * q4 + two * q4 * q4 * q4
        q = q + h * (k1q + two * (k2q + k3q) + k4q) * sixth
        qp = qp + h * (k1p + two * (k2p + k3p) + k4p) * sixth
        if not np.isfinite(float(q)) or abs(float(q)) > 1e6:
            raise NumericalError(
                f"Painleve II integration left the stable branch at x={float(xe):.4f}")
        qs[i + 1] = q
        qps[i + 1] = qp

    grid = x_right + np.arange(nsteps + 1, dtype=float) * float(h)
    grid[-1] = x_left
    sol = Painleve2Solution(
        grid=grid,
        q_values=qs.astype(float),
        q_prime_values=qps.astype(float),
        x_right=float(x_right), x_left=float(x_left), step=float(step))
    if np.any(sol.q_values <= 0):
        raise NumericalError("Hastings-McLeod solution left the positive branch")
    return sol


def _cumulative_from_right(x: np.ndarray, f: np.ndarray, fp: np.ndarray) -> np.ndarray:
    """Cumulative integral from the right end on an ascending grid.

    Hermite-corrected trapezoid per cell:
        int_{x_i}^{x_{i+1}} f = h/2 (f_i + f_{i+1}) + h^2/12 (f'_i - f'_{i+1})
    with O(h^5 f'''') local error, so every grid point gets 4th order.
    """
    h = np.diff(x)
    seg = h / 2.0 * (f[:-1] + f[1:]) + h * h / 12.0 * (fp[:-1] - fp[1:])
    out = np.zeros_like(f)
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


@dataclass(frozen=True)
class TracyWidomTable:
    """Tabulated F1 with monotone cubic interpolation for CDF/quantiles."""

    s_grid: np.ndarray      # ascending
    cdf_values: np.ndarray
    interpolation_order: int = 3
    meta: Optional[dict] = None

    def __post_init__(self):
        s = np.asarray(self.s_grid, dtype=float)
        v = np.asarray(self.cdf_values, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or s.size < 8:
            raise InputError("table needs matching 1-D grids of length >= 8")
        if np.any(np.diff(s) <= 0):
            raise InputError("s_grid must be strictly ascending")
        if np.any(np.diff(v) <= 0) or v[0] <= 0 or v[-1] >= 1:
            raise InputError("cdf_values must be strictly increasing inside (0, 1)")
        if s[0] > -6.0 or s[-1] < 6.0:
            raise InputError("table must cover at least [-6, 6]")
        object.__setattr__(self, "s_grid", s)
        object.__setattr__(self, "cdf_values", v)
        object.__setattr__(self, "_interp", PchipInterpolator(s, v, extrapolate=False))

    def cdf(self, s):
        """F1(s); clamps to the open interval (0, 1) outside the grid."""
        s_arr = np.asarray(s, dtype=float)
        out = self._interp(np.clip(s_arr, self.s_grid[0], self.s_grid[-1]))
        lo, hi = self.cdf_values[0], self.cdf_values[-1]
        out = np.where(s_arr < self.s_grid[0], lo, out)
        out = np.where(s_arr > self.s_grid[-1], hi, out)
        out = np.clip(out, 1e-300, 1.0 - 1e-16)
        return out if out.ndim else float(out)

    def quantile(self, alpha: float) -> float:
        """Inverse CDF by bracketed root finding on the interpolant."""
        if not (0.0005 < alpha < 0.9995):
            raise DomainError(
                f"quantile level must lie in (0.0005, 0.9995), got {alpha}")
        lo, hi = self.s_grid[0], self.s_grid[-1]
        return float(brentq(lambda s: self.cdf(s) - alpha, lo, hi, xtol=1e-10))

    def save(self, path) -> None:
        meta = self.meta or {}
        with open(path, "w") as fh:
            fh.write(f"# {TABLE_VERSION}\n")
            for key in sorted(meta):
                fh.write(f"# {key}={meta[key]}\n")
            fh.write("s,F1\n")
            for s, v in zip(self.s_grid, self.cdf_values):
                fh.write(f"{s!r},{v!r}\n")

    @classmethod
    def load(cls, path) -> "TracyWidomTable":
        meta = {}
        rows = []
        with open(path) as fh:
            first = fh.readline().strip()
            if first != f"# {TABLE_VERSION}":
                raise InputError(
                    f"unrecognised table header {first!r} (expected {TABLE_VERSION!r})")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key.strip()] = val.strip()
                    continue
                if line.lower().startswith("s,"):
                    continue
                a, b = line.split(",")
                rows.append((float(a), float(b)))
        arr = np.asarray(rows)
        return cls(arr[:, 0], arr[:, 1], meta=meta)


def build_tw1_table(x_right: float = 6.0, x_left: float = -8.0,
                    step: float = 1e-4, tail_extent: float = 8.0,
                    tail_step: float = 0.05, grid_step: float = 0.01,
                    solution: Optional[Painleve2Solution] = None) -> TracyWidomTable:
    """Build the F1 table from a Painleve II solve.

    The outer integral is evaluated on the solver grid with a
    derivative-corrected trapezoid rule; beyond x_right the integrand is
    continued with the Airy function itself (q - Ai is far below roundoff
    there) out to x_right + tail_extent, past which the remaining mass is
    certified below 1e-12 and dropped.
    """
    sol = solution if solution is not None else solve_painleve2(x_right, x_left, step)

    # ascending solver grid
    xs = sol.grid[::-1].copy()
    q = sol.q_values[::-1].copy()
    qp = sol.q_prime_values[::-1].copy()

    # Airy continuation of the integrand beyond x_right
    xt = np.arange(sol.x_right + tail_step, sol.x_right + tail_extent + tail_step / 2,
                   tail_step)
    ai_pairs = [airy_ai_maclaurin(float(x)) for x in xt]
    qt = np.array([a for a, _ in ai_pairs])
    qpt = np.array([b for _, b in ai_pairs])
    # certified tail remainder beyond the continuation: for x >= X,
    # Ai(x) <= Ai(X) exp(-sqrt(X)(x-X)) so
    #   int_X^inf Ai <= Ai(X)/sqrt(X),  int_X^inf (x-s) Ai^2 decays faster.
    X = xt[-1]
    bound = qt[-1] / np.sqrt(X) + qt[-1] ** 2 * (X + 20.0)
    if bound > 1e-12:
        raise NumericalError(
            f"Airy tail remainder bound {bound:.2e} exceeds 1e-12; "
            "increase tail_extent")

    x_all = np.concatenate([xs, xt])
    q_all = np.concatenate([q, qt])
    qp_all = np.concatenate([qp, qpt])

    q2 = q_all * q_all
    d_q2 = 2.0 * q_all * qp_all
    xq2 = x_all * q2
    d_xq2 = q2 + x_all * d_q2

    Q1 = _cumulative_from_right(x_all, q_all, qp_all)
    Q2 = _cumulative_from_right(x_all, q2, d_q2)
    Q3 = _cumulative_from_right(x_all, xq2, d_xq2)

    n_solver = xs.size
    exponent = Q1[:n_solver] + Q3[:n_solver] - xs * Q2[:n_solver]
    f1 = np.exp(-0.5 * exponent)

    stride = max(1, int(round(grid_step / sol.step)))
    idx = np.arange(0, n_solver, stride)
    if idx[-1] != n_solver - 1:
        idx = np.append(idx, n_solver - 1)
    meta = {
        "x_right": sol.x_right, "x_left": sol.x_left, "step": sol.step,
        "tail_extent": tail_extent, "grid_step": grid_step,
    }
    return TracyWidomTable(xs[idx], f1[idx], meta=meta)


def tw1_cdf(table: TracyWidomTable, s):
    """F1(s) from a built table."""
    return table.cdf(s)


def tw1_quantile(table: TracyWidomTable, alpha: float) -> float:
    """F1^{-1}(alpha) from a built table."""
    return table.quantile(alpha)


def verify_tw1_table(table: TracyWidomTable, tol: float = 0.005) -> dict:
    """Check the table against the reference quantile anchors.

    Returns a report dict; raises NumericalError if any anchor misses by
    more than ``tol`` in probability.
    """
    report = {}
    worst = 0.0
    for prob, s in sorted(TW1_REFERENCE_QUANTILES.items()):
        got = float(table.cdf(s))
        err = abs(got - prob)
        worst = max(worst, err)
        report[s] = {"expected": prob, "cdf": got, "abs_error": err}
    report["max_abs_error"] = worst
    if worst > tol:
        raise NumericalError(
            f"Tracy-Widom table failed anchor verification (max error {worst:.4g})")
    return report


# ---------------------------------------------------------------------------
# cached default table

_DEFAULT_TABLE: Optional[TracyWidomTable] = None
_TABLE_LOCK = threading.Lock()


def default_table_path() -> str:
    base = os.environ.get("SPECTRASTAT_CACHE_DIR")
    if not base:
        base = os.path.join(os.path.expanduser("~"), ".cache", "spectrastat")
    return os.path.join(base, "tw1_table_v1.csv")


def default_table(rebuild: bool = False) -> TracyWidomTable:
    """The process-wide F1 table; built at most once and persisted.

    The table is loaded from the cache file when present, otherwise built
    (a few seconds) and saved.  ``rebuild`` forces a fresh build.
    """
    global _DEFAULT_TABLE
    with _TABLE_LOCK:
        if _DEFAULT_TABLE is not None and not rebuild:
            return _DEFAULT_TABLE
        path = default_table_path()
        if not rebuild and os.path.exists(path):
            try:
                _DEFAULT_TABLE = TracyWidomTable.load(path)
                return _DEFAULT_TABLE
            except (InputError, ValueError):
                pass  # stale or corrupt cache: rebuild below
        t0 = time.time()
        table = build_tw1_table()
        meta = dict(table.meta or {})
        meta["build_seconds"] = round(time.time() - t0, 3)
        table = TracyWidomTable(table.s_grid, table.cdf_values, meta=meta)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        table.save(path)
        _DEFAULT_TABLE = table
        return table


# ---------------------------------------------------------------------------
# centering / scaling constant families

@dataclass(frozen=True)
class WishartCentering:
    """Centering/scaling for the largest eigenvalue of a white Wishart Gram
    matrix (data p x n, Gram XX^T):
        mu = (sqrt(n-1) + sqrt(p))^2
        sigma = (sqrt(n-1) + sqrt(p)) (1/sqrt(n-1) + 1/sqrt(p))^{1/3}
    """

    n: int
    p: int
    mu: float
    sigma: float


def wishart_centering(n: int, p: int) -> WishartCentering:
    if n < 2 or p < 1:
        raise PreconditionError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
    rn, rp = np.sqrt(n - 1.0), np.sqrt(float(p))
    mu = (rn + rp) ** 2
    sigma = (rn + rp) * (1.0 / rn + 1.0 / rp) ** (1.0 / 3.0)
    return WishartCentering(n=n, p=p, mu=float(mu), sigma=float(sigma))


@dataclass(frozen=True)
class SignalCentering:
    """Half-integer-corrected constants for eigenvalues of S = Gram/n:
        mu = (sqrt(n-1/2) + sqrt(p-1/2))^2 / n
        xi = sqrt(mu/n) (1/sqrt(n-1/2) + 1/sqrt(p-1/2))^{1/3}
    """

    n: int
    p: int
    mu: float
    xi: float


def signal_centering(n: int, p: int) -> SignalCentering:
    if n < 1 or p < 1:
        raise PreconditionError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    rn, rp = np.sqrt(n - 0.5), np.sqrt(p - 0.5)
    mu = (rn + rp) ** 2 / n
    xi = np.sqrt(mu / n) * (1.0 / rn + 1.0 / rp) ** (1.0 / 3.0)
    return SignalCentering(n=n, p=p, mu=float(mu), xi=float(xi))


@dataclass(frozen=True)
class JacobiCentering:
    """Angle-parameterized constants for the largest root of the
    two-Wishart pencil det(lambda * A - B) = 0 (A from m samples, B from n
    samples, dimension p)."""

    m: int
    n: int
    p: int
    m_breve: int
    n_breve: int
    p_breve: int
    gamma_angle: float
    psi_angle: float
    mu_j: float
    sigma_j: float


def _jacobi_constants(m: int, n: int, p: int) -> JacobiCentering:
    """Breve-corrected constants; valid on both sides of the p/m = 1
    duality (no p < m requirement)."""
    if min(m, n, p) < 2:
        raise PreconditionError("all counts must be >= 2")
    if m + n <= p:
        raise PreconditionError(f"need m + n > p, got m={m}, n={n}, p={p}")
    mb = max(m, p)
    nb = min(n, m + n - p)
    pb = min(m, p)
    denom = mb + nb - 1.0
    s_gamma = (min(pb, nb) - 0.5) / denom
    s_psi = (max(pb, nb) - 0.5) / denom
    gamma = 2.0 * np.arcsin(np.sqrt(s_gamma))
    psi = 2.0 * np.arcsin(np.sqrt(s_psi))
    mu = np.tan((gamma + psi) / 2.0) ** 2
    sigma3 = 16.0 * mu ** 3 / (
        denom ** 2 * np.sin(gamma) * np.sin(psi) * np.sin(gamma + psi) ** 2)
    if sigma3 <= 0:  # pragma: no cover - angles in (0, pi) keep this positive
        raise NumericalError("nonpositive sigma_J^3 in Jacobi centering")
    return JacobiCentering(
        m=m, n=n, p=p, m_breve=mb, n_breve=nb, p_breve=pb,
        gamma_angle=float(gamma), psi_angle=float(psi),
        mu_j=float(mu), sigma_j=float(sigma3 ** (1.0 / 3.0)))


def jacobi_centering(m: int, n: int, p: int) -> JacobiCentering:
    """Constants for the largest-root law with dimension ratio p/m < 1.

    The p >= m regime is reachable through the breve duality but is not
    part of this operation's contract; it raises PreconditionError here.
    """
    if p >= m:
        raise PreconditionError(
            f"requires p < m (dimension ratio below one), got p={p}, m={m}")
    return _jacobi_constants(m, n, p)
