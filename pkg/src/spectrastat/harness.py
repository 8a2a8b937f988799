"""Seeded Monte Carlo harness: matrix ensemble generators and the
desk-scale reproduction experiments.

Determinism contract: every replicate draws from its own counter-based
stream keyed by (seed, replicate index), so results are independent of
worker count and identical across runs with the same config.  Statistical
distributions (not bit patterns) are the compatibility promise.

Noise families are standardized to mean 0 and variance 1 where a variance
exists; the Cauchy family has none and is used unscaled (documented).
Heavy-tail draws are inverse-CDF transforms of uniforms.
"""

from __future__ import annotations

import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy
from scipy import stats as sps

from .changepoint import SegmentationConfig, ratio_binseg
from .errors import ConfigError
from .signal_count import SignalDetectionConfig, estimate_signal_count
from .spectral_core import DataMatrix, Spectrum
from .tracy_widom import TracyWidomTable, wishart_centering

NOISE_FAMILIES = ("gaussian", "t5", "cauchy", "laplace")

# scale factors that standardize each family to unit variance
_T5_SCALE = math.sqrt(3.0 / 5.0)        # Var(t_5) = 5/3
_LAPLACE_SCALE = 1.0 / math.sqrt(2.0)   # Var(Laplace(0,1)) = 2


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for one replicate.

    Philox keyed by the (seed, index) pair: splittable, 64-bit, and
    deterministic regardless of how replicates are scheduled.
    """
    key = np.array([seed % (1 << 64), index % (1 << 64)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def draw_noise(rng: np.random.Generator, shape, family: str = "gaussian") -> np.ndarray:
    """Standardized noise draws (Cauchy exempt from standardization)."""
    if family == "gaussian":
        return rng.standard_normal(shape)
    u = rng.random(shape)
    if family == "t5":
        return sps.t.ppf(u, df=5) * _T5_SCALE
    if family == "cauchy":
        return np.tan(np.pi * (u - 0.5))
    if family == "laplace":
        # inverse CDF of the unit-variance Laplace
        return np.sign(u - 0.5) * np.log1p(-2.0 * np.abs(u - 0.5)) * -_LAPLACE_SCALE
    raise ConfigError(f"unknown noise family {family!r}")


@dataclass(frozen=True)
class EnsembleSpec:
    """What to simulate: kind plus kind-specific parameters.

    kinds:
      white-wishart       p, n [, noise]
      spiked              p, n, spikes (descending, >= 1) [, sigma2, noise]
      f-pair              p, n1, n2 [, noise]
      changepoint-series  p, segment_lengths, segment_covs (SPD list) [, noise]
    """

    kind: str
    params: dict

    def __post_init__(self):
        kind, prm = self.kind, self.params
        if kind == "white-wishart":
            need = {"p", "n"}
        elif kind == "spiked":
            need = {"p", "n", "spikes"}
            spikes = prm.get("spikes", ())
            if any(s < 1 for s in spikes):
                raise ConfigError("spiked ensemble needs spikes >= 1")
        elif kind == "f-pair":
            need = {"p", "n1", "n2"}
        elif kind == "changepoint-series":
            need = {"p", "segment_lengths", "segment_covs"}
            for cov in prm.get("segment_covs", []):
                c = np.asarray(cov, dtype=float)
                if c.shape != (prm["p"], prm["p"]):
                    raise ConfigError("segment covariance has wrong shape")
                if np.linalg.eigvalsh((c + c.T) / 2).min() <= 0:
                    raise ConfigError("segment covariances must be SPD")
        else:
            raise ConfigError(f"unknown ensemble kind {kind!r}")
        missing = need - set(prm)
        if missing:
            raise ConfigError(f"{kind} ensemble missing parameters {sorted(missing)}")
        fam = prm.get("noise", "gaussian")
        if fam not in NOISE_FAMILIES:
            raise ConfigError(f"unknown noise family {fam!r}")


def generate_ensemble(spec: EnsembleSpec, rng: np.random.Generator):
    """Draw one realization; deterministic given the generator state."""
    prm = spec.params
    fam = prm.get("noise", "gaussian")
    if spec.kind == "white-wishart":
        return DataMatrix(draw_noise(rng, (prm["n"], prm["p"]), fam))
    if spec.kind == "spiked":
        p, n = prm["p"], prm["n"]
        sigma2 = prm.get("sigma2", 1.0)
        z = draw_noise(rng, (n, p), fam)
        scale = np.full(p, math.sqrt(sigma2))
        for j, ell in enumerate(prm["spikes"]):
            scale[j] = math.sqrt(ell * sigma2)
        return DataMatrix(z * scale)
    if spec.kind == "f-pair":
        p = prm["p"]
        return (DataMatrix(draw_noise(rng, (prm["n1"], p), fam)),
                DataMatrix(draw_noise(rng, (prm["n2"], p), fam)))
    if spec.kind == "changepoint-series":
        p = prm["p"]
        blocks = []
        for length, cov in zip(prm["segment_lengths"], prm["segment_covs"]):
            root = np.linalg.cholesky(np.asarray(cov, dtype=float))
            blocks.append(draw_noise(rng, (length, p), fam) @ root.T)
        return DataMatrix(np.vstack(blocks))
    raise ConfigError(f"unknown ensemble kind {spec.kind!r}")   # pragma: no cover


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 20260810
    reps: int = 2000
    alpha: float = 0.05
    noise: str = "gaussian"
    threads: int = 1
    out_dir: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")


def _map_replicates(fn: Callable[[int], object], reps: int, threads: int) -> list:
    """Order-preserving replicate map; results indexed by replicate."""
    if threads <= 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(reps)))


def _manifest(config: ExperimentConfig, started: float, extra: dict) -> dict:
    return {
        "experiment": config.experiment,
        "config": {
            "seed": config.seed, "reps": config.reps, "alpha": config.alpha,
            "noise": config.noise, "threads": config.threads,
            **config.extra,
        },
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_seconds": round(time.time() - started, 3),
        **extra,
    }


# ---------------------------------------------------------------------------
# experiment: finite-sample largest-eigenvalue CDF vs the F1 limit

TABLE1_PERCENTILES = (-3.90, -3.18, -2.78, -1.91, -1.27, -0.59, 0.45, 0.98, 2.02)
TABLE1_CASES = ((5, 5), (10, 10), (100, 100), (20, 5), (40, 10), (400, 100))


def run_table1(config: ExperimentConfig, tw: Optional[TracyWidomTable] = None,
               cases: Sequence = TABLE1_CASES) -> dict:
    """Empirical CDF of the normalized largest Wishart eigenvalue.

    For each (n, p) case, draws ``reps`` white Gram matrices, normalizes
    the top eigenvalue by the Wishart centering constants, and evaluates
    the empirical CDF at the standard percentile grid.  The 2*SE column
    is the binomial bound at the F1 probabilities.
    """
    started = time.time()
    percentiles = np.array(TABLE1_PERCENTILES)
    rows = []
    for case_idx, (n, p) in enumerate(cases):
        cen = wishart_centering(n, p)

        def one(r, n=n, p=p, cen=cen, case_idx=case_idx):
            rng = replicate_rng(config.seed + case_idx, r)
            x = draw_noise(rng, (n, p), config.noise)
            gram = x.T @ x
            top = float(np.linalg.eigvalsh((gram + gram.T) / 2.0)[-1])
            return (top - cen.mu) / cen.sigma

        vals = np.array(_map_replicates(one, config.reps, config.threads))
        ecdf = [(float(np.mean(vals <= s))) for s in percentiles]
        rows.append({"n": n, "p": p, "ecdf": ecdf})
    tw_probs = [float(tw.cdf(s)) for s in percentiles] if tw is not None else None
    two_se = [2.0 * math.sqrt(pr * (1 - pr) / config.reps)
              for pr in (tw_probs or [0.5] * len(percentiles))]
    return {
        "percentiles": [float(s) for s in percentiles],
        "tw_probs": tw_probs,
        "cases": rows,
        "two_se": two_se,
        "manifest": _manifest(config, started, {"cases": [list(c) for c in cases]}),
    }


# ---------------------------------------------------------------------------
# experiment: signal-count recovery across noise families

def run_signal_figure(config: ExperimentConfig,
                      tw: Optional[TracyWidomTable] = None,
                      n_grid: Sequence[int] = (100, 500, 1000, 2000, 5000),
                      k_grid: Sequence[int] = (2, 3, 4, 5),
                      p: int = 100,
                      families: Sequence[str] = NOISE_FAMILIES,
                      spike_strength: float = 10.0,
                      alpha: float = 0.005) -> dict:
    """Mean estimated signal count per (noise family, n, K) cell."""
    if tw is None:
        from .tracy_widom import default_table
        tw = default_table()
    started = time.time()
    det_cfg = SignalDetectionConfig(alpha=alpha)
    cells = []
    for fam_idx, fam in enumerate(families):
        for n in n_grid:
            for true_k in k_grid:
                spikes = tuple([spike_strength] * true_k)

                def one(r, fam=fam, n=n, spikes=spikes, fam_idx=fam_idx,
                        true_k=true_k):
                    rng = replicate_rng(
                        config.seed + 1000 * fam_idx + 10 * true_k + n, r)
                    spec = EnsembleSpec("spiked",
                                        {"p": p, "n": n, "spikes": spikes,
                                         "noise": fam})
                    data = generate_ensemble(spec, rng)
                    s = data.values.T @ data.values / n
                    vals = np.linalg.eigvalsh((s + s.T) / 2.0)[::-1]
                    trace = estimate_signal_count(
                        Spectrum(vals), n, det_cfg, tw)
                    return trace.k_hat

                khats = _map_replicates(one, config.reps, config.threads)
                cells.append({"noise": fam, "n": n, "K": true_k,
                              "mean_khat": float(np.mean(khats)),
                              "exact_rate": float(np.mean(
                                  np.asarray(khats) == true_k))})
    return {"p": p, "alpha": alpha, "spike_strength": spike_strength,
            "cells": cells,
            "manifest": _manifest(config, started,
                                  {"n_grid": list(n_grid),
                                   "k_grid": list(k_grid)})}


# ---------------------------------------------------------------------------
# experiment: changepoint false positive rate

def fpr_segment_covariances(p: int) -> list:
    """The documented FPR generator: alternate the identity with a fixed
    rotation of diag(2, ..., 2, 1, ..., 1) (first half doubled)."""
    rng = np.random.Generator(np.random.Philox(key=np.array([97, 53],
                                                            dtype=np.uint64)))
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    d = np.ones(p)
    d[: p // 2] = 2.0
    sigma_b = q @ np.diag(d) @ q.T
    return [np.eye(p), (sigma_b + sigma_b.T) / 2.0, np.eye(p)]


def changepoint_fpr(detected: Sequence[int], truth: Sequence[int],
                    window: int = 20) -> Optional[float]:
    """FPR = (#detected - #correct) / #detected; None when nothing was
    detected.  A detection is correct within +-window of a true change."""
    if len(detected) == 0:
        return None
    correct = sum(
        1 for t_hat in detected
        if any(abs(t_hat - t) <= window for t in truth))
    return (len(detected) - correct) / len(detected)


def run_fpr_table(config: ExperimentConfig,
                  cases: Sequence = ((3, 500), (10, 1000), (30, 2000),
                                     (100, 5000)),
                  window: int = 20) -> dict:
    """Detected-changepoint FPR under the documented segment generator.

    Each replicate series has two true changes at n/3 and 2n/3; min_seg
    is max(p+1, n/10).
    """
    started = time.time()
    rows = []
    for case_idx, (p, n) in enumerate(cases):
        covs = fpr_segment_covariances(p)
        lengths = [n // 3, n // 3, n - 2 * (n // 3)]
        truth = [n // 3, 2 * (n // 3)]
        min_seg = max(p + 1, n // 10)

        def one(r, p=p, n=n, covs=covs, lengths=lengths, truth=truth,
                min_seg=min_seg, case_idx=case_idx):
            rng = replicate_rng(config.seed + 31 * case_idx, r)
            spec = EnsembleSpec("changepoint-series",
                                {"p": p, "segment_lengths": lengths,
                                 "segment_covs": covs, "noise": config.noise})
            data = generate_ensemble(spec, rng)
            res = ratio_binseg(data, SegmentationConfig(alpha=config.alpha,
                                                        min_seg=min_seg))
            return res.changepoints

        all_detected = _map_replicates(one, config.reps, config.threads)
        n_det = sum(len(d) for d in all_detected)
        n_correct = sum(
            sum(1 for t_hat in det if any(abs(t_hat - t) <= window for t in truth))
            for det in all_detected)
        fpr = (n_det - n_correct) / n_det if n_det else 0.0
        rows.append({"p": p, "n": n, "detected": n_det,
                     "correct": n_correct, "fpr": fpr,
                     "mean_detected": n_det / config.reps})
    return {"window": window, "rows": rows,
            "manifest": _manifest(config, started,
                                  {"generator": "I / rotated-diag(2,..,1) / I",
                                   "changes_at": "n/3, 2n/3",
                                   "cases": [list(c) for c in cases]})}


# ---------------------------------------------------------------------------
# plot-data emission

def plot_data_emit(kind: str, params: Optional[dict] = None,
                   tw: Optional[TracyWidomTable] = None) -> Dict[str, np.ndarray]:
    """Deterministic two-column curves backing the standard figures.

    kinds: "mp-density" (gammas, grid), "tw-density" (grid via centered
    finite differences of F1, step 1e-3), "spiked-limits" (ell grid and
    their eigenvalue limits).
    """
    params = dict(params or {})
    if kind == "mp-density":
        from .limit_laws import MPLaw
        gammas = params.get("gammas", (0.1, 0.25, 0.5, 1.0))
        num = int(params.get("grid", 512))
        out = {}
        for g in gammas:
            law = MPLaw(gamma=float(g))
            lo, hi = law.support
            xs = np.linspace(max(1e-9, lo * 0.9), hi * 1.05, num)
            out[f"mp_gamma_{g}"] = np.column_stack([xs, law.pdf(xs)])
        return out
    if kind == "tw-density":
        if tw is None:
            from .tracy_widom import default_table
            tw = default_table()
        lo = float(params.get("lo", -5.5))
        hi = float(params.get("hi", 4.0))
        num = int(params.get("grid", 512))
        step = 1e-3
        xs = np.linspace(lo, hi, num)
        dens = (np.asarray(tw.cdf(xs + step)) - np.asarray(tw.cdf(xs - step))) / (2 * step)
        return {"tw1_density": np.column_stack([xs, dens])}
    if kind == "spiked-limits":
        from .spiked_pca import bbp_limit
        gamma = float(params.get("gamma", 0.25))
        num = int(params.get("grid", 256))
        ells = np.linspace(1.0, float(params.get("ell_max", 4.0)), num)
        lims = np.array([bbp_limit(float(e), gamma) for e in ells])
        return {f"spiked_limits_gamma_{gamma}": np.column_stack([ells, lims])}
    raise ConfigError(f"unknown plot kind {kind!r}")


def write_experiment_output(result: dict, out_dir: str, name: str) -> None:
    """Write <name>.json plus a manifest next to it."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"{name}.json"), "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
