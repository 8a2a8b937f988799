"""Hot inner loops for the changepoint scan.

The candidate sweep builds a running Gram matrix row by row and, at each
admissible split, reduces the two segment covariances to a symmetric
eigenproblem.  The numba path compiles that loop; the numpy path is the
same code uncompiled.  Selection: numba is used when importable unless
SPECTRASTAT_NO_NUMBA is set to a non-empty value.

The two paths share one code object and differ only in compilation; they
agree to ~1e-14 relative (the eigensolver drivers differ), and each path
is deterministic on its own.
"""

from __future__ import annotations

import os

import numpy as np


def _scan_stats_impl(X, s, e, tau0, ncand, mu_arr, sigma_arr, center_arr,
                     p_js, do_center):
    """T~ for candidates tau = tau0 ... tau0 + ncand - 1 of X[s:e].

    Left segment rows s..tau-1, right rows tau..e-1; covariances use
    divisor = segment length.  With do_center the segment means are
    subtracted first (divisor unchanged).  mu_arr/sigma_arr/center_arr
    hold per-candidate CLT constants, p_js = float(p).  A candidate whose
    pencil is not positive definite gets NaN.
    """
    n, p = X.shape
    out = np.full(ncand, np.nan)
    gram = np.zeros((p, p))
    total = np.zeros((p, p))
    rowsum = np.zeros(p)
    totsum = np.zeros(p)
    for i in range(s, e):
        xi = X[i]
        total += np.outer(xi, xi)
        totsum += xi
    for i in range(s, tau0):
        xi = X[i]
        gram += np.outer(xi, xi)
        rowsum += xi
    for idx in range(ncand):
        tau = tau0 + idx
        if idx > 0:
            xi = X[tau - 1]
            gram += np.outer(xi, xi)
            rowsum += xi
        n1 = tau - s
        n2 = e - tau
        A = gram / n1
        B = (total - gram) / n2
        if do_center:
            mean1 = rowsum / n1
            mean2 = (totsum - rowsum) / n2
            A = A - np.outer(mean1, mean1)
            B = B - np.outer(mean2, mean2)
        # symmetric reduction of the (A, B) pencil via cholesky of B
        L = np.linalg.cholesky(B)
        M = np.linalg.solve(L, A)
        C = np.linalg.solve(L, M.T)
        C = (C + C.T) / 2.0
        lam = np.linalg.eigvalsh(C)
        ok = True
        t_val = 0.0
        for j in range(p):
            lj = lam[j]
            if lj <= 0.0:
                ok = False
                break
            t_val += (1.0 - lj) ** 2 + (1.0 - 1.0 / lj) ** 2
        if ok:
            out[idx] = (t_val - p_js * center_arr[idx] - mu_arr[idx]) / sigma_arr[idx]
    return out


_scan_stats_numpy = _scan_stats_impl

_NUMBA_DISABLED = bool(os.environ.get("SPECTRASTAT_NO_NUMBA"))
if not _NUMBA_DISABLED:
    try:
        import numba

        _scan_stats_numba = numba.njit(cache=True)(_scan_stats_impl)
    except ImportError:  # pragma: no cover - numba is an optional extra
        _scan_stats_numba = None
else:
    _scan_stats_numba = None


def scan_stats(X, s, e, tau0, ncand, mu_arr, sigma_arr, center_arr,
               do_center=False):
    """Dispatch to the compiled scan when available."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    args = (X, int(s), int(e), int(tau0), int(ncand),
            np.ascontiguousarray(mu_arr, dtype=np.float64),
            np.ascontiguousarray(sigma_arr, dtype=np.float64),
            np.ascontiguousarray(center_arr, dtype=np.float64),
            float(X.shape[1]), bool(do_center))
    if _scan_stats_numba is not None:
        try:
            return _scan_stats_numba(*args)
        except Exception:
            # a cholesky failure raises LinAlgError out of the compiled
            # loop; redo in numpy where per-candidate NaN marking works
            pass
    return _scan_stats_numpy_guarded(*args)


def _scan_stats_numpy_guarded(X, s, e, tau0, ncand, mu_arr, sigma_arr,
                              center_arr, p_js, do_center):
    try:
        return _scan_stats_numpy(X, s, e, tau0, ncand, mu_arr, sigma_arr,
                                 center_arr, p_js, do_center)
    except np.linalg.LinAlgError:
        # per-candidate evaluation: one singular segment only poisons its
        # own candidate
        out = np.full(ncand, np.nan)
        for idx in range(ncand):
            tau = tau0 + idx
            left = X[s:tau]
            right = X[tau:e]
            if do_center:
                left = left - left.mean(axis=0)
                right = right - right.mean(axis=0)
            A = left.T @ left / (tau - s)
            B = right.T @ right / (e - tau)
            try:
                L = np.linalg.cholesky(B)
            except np.linalg.LinAlgError:
                continue
            M = np.linalg.solve(L, A)
            C = np.linalg.solve(L, M.T)
            lam = np.linalg.eigvalsh((C + C.T) / 2.0)
            if np.any(lam <= 0):
                continue
            t_val = float(np.sum((1 - lam) ** 2 + (1 - 1 / lam) ** 2))
            out[idx] = (t_val - p_js * center_arr[idx] - mu_arr[idx]) / sigma_arr[idx]
        return out


def kernel_in_use() -> str:
    return "numba" if _scan_stats_numba is not None else "numpy"
