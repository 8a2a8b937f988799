"""Dense symmetric-matrix utilities.

Sample covariance construction, eigenvalue extraction, empirical spectral
distribution (ESD) queries, and ESD-integral functionals.  Everything here
is a pure function over immutable inputs; rows of a data matrix are
observations and columns are variables (the transpose happens here, once,
for the rest of the package).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InputError, NumericalError, PreconditionError

# Relative tolerance for the symmetry check in eigenvalues_sym.
SYMMETRY_RTOL = 1e-10
# Negative eigenvalues of PSD sources within -PSD_CLIP_RTOL*lambda_max are
# zeroed so downstream log/ratio operations do not trip on roundoff.
PSD_CLIP_RTOL = 1e-12


@dataclass(frozen=True)
class DataMatrix:
    """An n x p data matrix: n observations (rows) of p variables."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise InputError(f"data matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"data matrix must be at least 1x1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise InputError("data matrix contains non-finite entries")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Spectrum:
    """Descending real eigenvalues of a p x p symmetric matrix.

    ``source_df`` records the Wishart-style degrees of freedom backing the
    spectrum (n or n-1) when known; tests that need a df ladder read it.
    """

    eigenvalues: np.ndarray
    source_df: Optional[int] = None

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float).ravel()
        if vals.size == 0:
            raise InputError("spectrum must contain at least one eigenvalue")
        if not np.isfinite(vals).all():
            raise InputError("spectrum contains non-finite values")
        if np.any(np.diff(vals) > 0):
            raise InputError("eigenvalues must be sorted in descending order")
        object.__setattr__(self, "eigenvalues", vals)

    @classmethod
    def from_values(cls, values, source_df: Optional[int] = None) -> "Spectrum":
        """Build a Spectrum from unsorted values (stable descending sort)."""
        vals = np.asarray(values, dtype=float).ravel()
        order = np.argsort(-vals, kind="stable")
        return cls(vals[order], source_df=source_df)

    @property
    def p(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class ESD:
    """Empirical spectral distribution: mass 1/p at each eigenvalue."""

    spectrum: Spectrum

    def cdf(self, x) -> np.ndarray:
        """Right-continuous step CDF evaluated at x (scalar or array)."""
        ascending = self.spectrum.eigenvalues[::-1]
        counts = np.searchsorted(ascending, np.asarray(x, dtype=float), side="right")
        return counts / self.spectrum.p


def sample_covariance(data: DataMatrix, center: bool = True,
                      divisor: str = "auto") -> np.ndarray:
    """Sample covariance of a data matrix.

    Parameters
    ----------
    data : DataMatrix
        n observations in rows.
    center : bool
        Subtract the column means.  Requires n >= 2.
    divisor : {"auto", "n", "n-1"}
        "auto" uses n-1 when centering and n otherwise, matching the two
        conventions used by the tests downstream.

    Returns
    -------
    (p, p) ndarray, exactly symmetric (symmetrized after accumulation).
    """
    n = data.n
    if center and n < 2:
        raise PreconditionError("centering requires at least 2 observations")
    if divisor == "auto":
        div = n - 1 if center else n
    elif divisor == "n":
        div = n
    elif divisor == "n-1":
        if n < 2:
            raise PreconditionError("divisor n-1 requires n >= 2")
        div = n - 1
    else:
        raise InputError(f"divisor must be 'auto', 'n' or 'n-1', got {divisor!r}")
    x = data.values
    if center:
        x = x - x.mean(axis=0)
    s = (x.T @ x) / div
    return (s + s.T) / 2.0


def eigenvalues_sym(m: np.ndarray, return_vectors: bool = False,
                    psd: bool = False):
    """Eigenvalues of a symmetric matrix, sorted descending.

    Parameters
    ----------
    m : (p, p) array, symmetric within SYMMETRY_RTOL relative tolerance.
    return_vectors : bool
        Also return the eigenvector matrix Q with columns matching the
        descending eigenvalue order.
    psd : bool
        The source is positive semidefinite; tiny negative eigenvalues
        (within -PSD_CLIP_RTOL * lambda_max) are clipped to zero.

    Returns
    -------
    Spectrum, or (Spectrum, Q) when return_vectors is set.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise InputError("matrix contains non-finite entries")
    scale = np.abs(m).max()
    if scale > 0 and np.abs(m - m.T).max() > SYMMETRY_RTOL * scale:
        raise InputError("matrix is asymmetric beyond tolerance")
    sym = (m + m.T) / 2.0
    try:
        if return_vectors:
            vals, vecs = np.linalg.eigh(sym)
        else:
            vals = np.linalg.eigvalsh(sym)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"symmetric eigensolver did not converge: {exc}") from exc
    vals = vals[::-1].copy()
    if psd and vals.size:
        lam_max = vals[0]
        if lam_max > 0:
            mask = (vals < 0) & (vals >= -PSD_CLIP_RTOL * lam_max)
            vals[mask] = 0.0
    spec = Spectrum(vals)
    if return_vectors:
        return spec, vecs[:, ::-1]
    return spec


def log_det_via_esd(s: Spectrum) -> float:
    """log-determinant of the matrix behind a spectrum, as the sum of logs.

    Equals p * integral(log x) against the ESD; requires every eigenvalue
    to be strictly positive.
    """
    vals = s.eigenvalues
    if np.any(vals <= 0):
        raise DomainError("log-determinant requires strictly positive eigenvalues")
    return float(np.sum(np.log(vals)))


def esd_ks_distance(e: ESD, law) -> float:
    """Kolmogorov-Smirnov distance between an ESD and a limit law.

    The supremum over the ESD's jump points, evaluated on both sides of
    each jump.  ``law`` needs a vectorized ``cdf`` (point masses included).
    """
    ascending = np.sort(e.spectrum.eigenvalues)
    p = ascending.size
    fl = np.asarray(law.cdf(ascending), dtype=float)
    hi = np.searchsorted(ascending, ascending, side="right") / p
    lo = np.searchsorted(ascending, ascending, side="left") / p
    return float(np.max(np.maximum(np.abs(hi - fl), np.abs(fl - lo))))


def load_csv(path, header: str = "auto") -> DataMatrix:
    """Read a comma-delimited data file, one observation per row.

    header="auto" skips a first row that fails to parse as numbers;
    "yes"/"no" force the decision.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader):
            row = [c for c in row if c.strip() != ""]
            if not row:
                continue
            if i == 0 and header in ("auto", "yes"):
                try:
                    rows.append([float(c) for c in row])
                except ValueError:
                    if header == "no":
                        raise InputError(f"non-numeric first row in {path}")
                    continue
            else:
                try:
                    rows.append([float(c) for c in row])
                except ValueError as exc:
                    raise InputError(f"non-numeric value in {path}: {exc}") from exc
    if not rows:
        raise InputError(f"no data rows in {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InputError(f"ragged rows in {path}")
    return DataMatrix(np.asarray(rows, dtype=float))


def save_spectrum_csv(spectrum: Spectrum, path) -> None:
    """Write eigenvalues as a single-column CSV (descending)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eigenvalue"])
        for v in spectrum.eigenvalues:
            writer.writerow([repr(float(v))])
