"""Spiked covariance diagnostics: phase-transition limits and fluctuation
scale for sample eigenvalues of identity-plus-low-rank population
covariances.

A population spike ell (in units of the noise level) produces a separated
sample eigenvalue only above the detectability threshold 1 + sqrt(gamma);
at or below the threshold the sample eigenvalue sticks to the bulk edge
(1 + sqrt(gamma))^2 and the associated sample eigenvector becomes
asymptotically orthogonal to the population one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import math

from .errors import DomainError, InputError


@dataclass(frozen=True)
class SpikedModel:
    """Population covariance sigma2 * (I + low-rank): spikes are the
    leading eigenvalues in units of sigma2, sorted descending, all > ... >= 1."""

    spikes: tuple
    gamma: float
    sigma2: float = 1.0

    def __post_init__(self):
        spikes = tuple(float(s) for s in self.spikes)
        if not spikes:
            raise InputError("model needs at least one spike")
        if any(s < 1.0 for s in spikes):
            raise DomainError("spikes must be >= 1 (at or above the noise level)")
        if any(a < b for a, b in zip(spikes, spikes[1:])):
            raise InputError("spikes must be sorted descending")
        if not (self.gamma > 0):
            raise InputError(f"gamma must be positive, got {self.gamma}")
        if not (self.sigma2 > 0):
            raise InputError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "spikes", spikes)


def bbp_limit(ell: float, gamma: float) -> float:
    """Almost-sure limit of the sample eigenvalue tracking a spike ell.

    ell * (1 + gamma/(ell - 1)) above the threshold 1 + sqrt(gamma);
    the bulk edge (1 + sqrt(gamma))^2 at or below it.  Continuous across
    the threshold and nondecreasing in ell.
    """
    if ell < 1.0:
        raise DomainError(f"spike must be >= 1, got {ell}")
    if not (gamma > 0):
        raise InputError(f"gamma must be positive, got {gamma}")
    threshold = 1.0 + math.sqrt(gamma)
    if ell <= threshold:
        return threshold ** 2
    return ell * (1.0 + gamma / (ell - 1.0))


def spike_fluctuation_sd(ell: float, gamma: float) -> float:
    """Asymptotic sd of sqrt(n) (lhat - bbp_limit) for a super-critical spike.

    Variance 2 ell^2 (1 - gamma/(ell-1)^2); only defined strictly above
    the phase transition.
    """
    if not (gamma > 0):
        raise InputError(f"gamma must be positive, got {gamma}")
    if ell <= 1.0 + math.sqrt(gamma):
        raise DomainError(
            f"spike {ell} is at or below the phase transition 1 + sqrt(gamma) "
            f"= {1.0 + math.sqrt(gamma):.6g}; no CLT-scale fluctuation there")
    var = 2.0 * ell * ell * (1.0 - gamma / (ell - 1.0) ** 2)
    return math.sqrt(var)


@dataclass(frozen=True)
class SpikeClassification:
    index: int
    ell: float
    detectable: bool
    limit: float                  # in original units (times sigma2)
    fluctuation_sd: Optional[float]
    warning: str = ""


def classify_spikes(model: SpikedModel) -> List[SpikeClassification]:
    """Label each spike detectable/undetectable with its eigenvalue limit.

    The threshold case is classified undetectable (the stuck branch uses a
    non-strict inequality).  Undetectable spikes carry the bulk-edge limit
    and an eigenvector-inconsistency warning.
    """
    out = []
    threshold = 1.0 + math.sqrt(model.gamma)
    for j, ell in enumerate(model.spikes, start=1):
        detectable = ell > threshold
        limit = model.sigma2 * bbp_limit(ell, model.gamma)
        sd = spike_fluctuation_sd(ell, model.gamma) * model.sigma2 if detectable else None
        warning = "" if detectable else (
            "sample eigenvector asymptotically orthogonal to the population "
            "direction (angle -> pi/2)")
        out.append(SpikeClassification(
            index=j, ell=ell, detectable=detectable, limit=float(limit),
            fluctuation_sd=sd, warning=warning))
    return out
