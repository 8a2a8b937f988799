"""Sequential Tracy-Widom-thresholded estimation of the number of signals
embedded in white noise.

Given the descending eigenvalues l_1 >= ... >= l_p of S = Gram/n, test at
each k whether l_k could be the largest eigenvalue of a pure-noise
covariance of dimension p - k: reject (at least k signals) while

    l_k > sigma_hat^2(k) * (mu_{n,p-k} + s(alpha) * xi_{n,p-k})

with sigma_hat^2(k) the mean of the trailing p-k eigenvalues and s(alpha)
the upper Tracy-Widom quantile.  The estimate is the last k that rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from .errors import DomainError, InputError, PreconditionError
from .spectral_core import Spectrum
from .tracy_widom import TracyWidomTable, signal_centering


@dataclass(frozen=True)
class SignalDetectionConfig:
    alpha: float = 0.005
    max_k: Optional[int] = None      # default min(p, n) - 1

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.max_k is not None and self.max_k < 1:
            raise InputError(f"max_k must be >= 1, got {self.max_k}")


@dataclass(frozen=True)
class SignalTraceRow:
    k: int
    l_k: float
    sigma2_k: float
    threshold: float         # sigma2_k * C_{n,p,k}(alpha)
    exceeded: bool


@dataclass(frozen=True)
class SignalDetectionTrace:
    k_hat: int
    rows: List[SignalTraceRow] = field(default_factory=list)
    saturated: bool = False  # every tested k exceeded; k_hat == max_k

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            if row.exceeded != (i < self.k_hat):
                raise InputError("inconsistent trace: stopping rule violated")


def noise_variance_estimate(spectrum: Spectrum, k: int) -> float:
    """Mean of the trailing p - k eigenvalues: noise level under 'at most
    k signals'."""
    p = spectrum.p
    if not (0 <= k < p):
        raise DomainError(f"need 0 <= k < p, got k={k}, p={p}")
    return float(spectrum.eigenvalues[k:].mean())


def signal_threshold(n: int, p: int, k: int, alpha: float,
                     tw: TracyWidomTable) -> float:
    """C_{n,p,k}(alpha) = mu_{n,p-k} + s(alpha) xi_{n,p-k} with the
    half-integer-corrected centering constants."""
    if p - k < 1:
        raise DomainError(f"need p - k >= 1, got p={p}, k={k}")
    if n < 1:
        raise PreconditionError(f"need n >= 1, got n={n}")
    cen = signal_centering(n, p - k)
    s_alpha = tw.quantile(1.0 - alpha)
    return cen.mu + s_alpha * cen.xi


def estimate_signal_count(spectrum: Spectrum, n: int,
                          config: SignalDetectionConfig,
                          tw: TracyWidomTable) -> SignalDetectionTrace:
    """Run the sequential threshold tests and return the trace.

    Stops at the first k whose eigenvalue fails to exceed its threshold;
    k_hat is that k minus one.  If every k up to max_k exceeds, k_hat
    saturates at max_k and the trace is flagged.
    """
    p = spectrum.p
    if p < 2:
        raise InputError(f"need a spectrum of dimension >= 2, got p={p}")
    max_k = config.max_k if config.max_k is not None else min(p, n) - 1
    max_k = min(max_k, p - 1)
    rows = []
    k_hat = 0
    saturated = True
    for k in range(1, max_k + 1):
        l_k = float(spectrum.eigenvalues[k - 1])
        sigma2_k = noise_variance_estimate(spectrum, k)
        thr = sigma2_k * signal_threshold(n, p, k, config.alpha, tw)
        exceeded = l_k > thr
        rows.append(SignalTraceRow(k=k, l_k=l_k, sigma2_k=sigma2_k,
                                   threshold=thr, exceeded=exceeded))
        if not exceeded:
            k_hat = k - 1
            saturated = False
            break
    else:
        k_hat = max_k
    if max_k == 0:
        saturated = False
    return SignalDetectionTrace(k_hat=k_hat, rows=rows, saturated=saturated)
