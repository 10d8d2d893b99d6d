"""Source counting and localization by sequential RANSAC sinusoid regression.

Each outer pass fits a fixed-frequency sinusoid through two random samples,
keeps the candidate with the most samples inside the ``sigma_conf`` band, records
it and strips its inliers from the signal. Fits whose inlier count reaches the
confidence threshold (relative to the best fit) are reported as sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import (
    ItdSignal,
    LocalizationResult,
    OrientationEstimate,
    SineFit,
    draw_valid_pairs,
    theta_from_amplitude,
    wrap_deg,
)
from .errors import ConfigError, InsufficientData

_CHUNK = 1024


@dataclass(frozen=True)
class RansacParams:
    n_iter: int = 5000
    sigma_conf_m: float = 0.015688
    confidence_threshold_pct: float = 10.0
    max_sources: int = 12
    min_inliers_abs: int = 5
    seed: object = None

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigError("n_iter must be >= 1")
        if not self.sigma_conf_m > 0:
            raise ConfigError("sigma_conf_m must be positive")
        if not 0 < self.confidence_threshold_pct <= 100:
            raise ConfigError("confidence_threshold_pct must be in (0, 100]")
        if self.max_sources < 1:
            raise ConfigError("max_sources must be >= 1")


@dataclass(frozen=True)
class FitRecord:
    fit: SineFit
    count: int
    inlier_indices: np.ndarray = field(repr=False)
    candidate_counts: np.ndarray | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class RansacTrace:
    """Full outcome of :func:`localize_ransac`, including non-qualifying fits."""

    records: list[FitRecord]
    confidences: list[float]
    result: LocalizationResult


def ransac_fit_once(itd: ItdSignal, params: RansacParams, rng=None, debug: bool = False) -> FitRecord:
    """Best single sinusoid over ``params.n_iter`` valid random pairs.

    Ties on inlier count go to the earliest draw.
    """
    if len(itd) < 2:
        raise InsufficientData("RANSAC needs at least two samples")
    rng = np.random.default_rng(params.seed) if rng is None else rng
    t, d = itd.t_s, itd.d_m
    omega = itd.array.omega_rad_s
    _, _, amp, phase = draw_valid_pairs(t, d, omega, params.n_iter, rng)
    if amp.size == 0:
        # every pair is zero-valued or degenerate: the flat zero model explains the data
        inl = np.flatnonzero(np.abs(d) <= params.sigma_conf_m)
        return FitRecord(SineFit(0.0, 0.0), int(inl.size), inl)

    wt = omega * t
    # A sin(p - wt) = (A sin p) cos wt - (A cos p) sin wt
    basis = np.stack([np.cos(wt), -np.sin(wt)])
    coef = np.stack([amp * np.sin(phase), amp * np.cos(phase)], axis=1)
    counts = np.empty(amp.size, dtype=int)
    for lo in range(0, amp.size, _CHUNK):
        resid = np.abs(d[None, :] - coef[lo : lo + _CHUNK] @ basis)
        counts[lo : lo + _CHUNK] = (resid <= params.sigma_conf_m).sum(axis=1)
    best = int(np.argmax(counts))
    a, p = amp[best], phase[best]
    inl = np.flatnonzero(np.abs(d - a * np.sin(p - wt)) <= params.sigma_conf_m)
    return FitRecord(
        SineFit(float(a), wrap_deg(math.degrees(p))),
        int(inl.size),
        inl,
        counts if debug else None,
    )


def ransac_trace(itd: ItdSignal, params: RansacParams, debug: bool = False) -> RansacTrace:
    rng = np.random.default_rng(params.seed)
    remaining = np.arange(len(itd))
    records: list[FitRecord] = []
    while remaining.size >= 2 and len(records) < params.max_sources:
        rec = ransac_fit_once(itd.subset(remaining), params, rng=rng, debug=debug)
        if rec.count < params.min_inliers_abs or rec.count == 0:
            break
        global_idx = remaining[rec.inlier_indices]
        records.append(FitRecord(rec.fit, rec.count, global_idx, rec.candidate_counts))
        remaining = np.setdiff1d(remaining, global_idx, assume_unique=True)

    if not records:
        return RansacTrace([], [], LocalizationResult([]))
    top = max(r.count for r in records)
    conf = [100.0 * r.count / top for r in records]
    b = itd.array.half_baseline_m
    estimates = [
        OrientationEstimate(
            theta_deg=theta_from_amplitude(r.fit.amplitude_m, b),
            phi_deg=r.fit.phase_deg,
            support=r.count,
            confidence_pct=c,
            amplitude_m=r.fit.amplitude_m,
        )
        for r, c in zip(records, conf)
        if c >= params.confidence_threshold_pct
    ]
    return RansacTrace(records, conf, LocalizationResult(estimates))


def localize_ransac(itd: ItdSignal, params: RansacParams | None = None) -> LocalizationResult:
    return ransac_trace(itd, params or RansacParams()).result
