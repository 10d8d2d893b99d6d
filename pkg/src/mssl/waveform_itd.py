"""Waveform-level ITD: two-microphone synthesis and cross-correlation delay estimation.

Lag convention: ``R[k] = mean_n y1[n] * y2[n - k]``. When ``y2`` is ``y1``
advanced by ``k0`` samples (``y2[n] = y1[n + k0]``) the peak sits at ``+k0``, so
``synth_mic_pair(src, +tau)`` followed by :func:`estimate_itd` returns ``+tau * c0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal

from .core_model import ArrayConfig, ItdSignal
from .errors import ConfigError, DelayOutOfRange, FrameTooShort, MismatchedRates
from .scene_sim import Scene, SimParams, activity_mask, assign_sources, sample_times, source_weights

FRACTIONAL_TAPS = 31
MAX_LAG_MARGIN = 1.25


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    fs_hz: float = 44100.0

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float).reshape(-1)
        if not self.fs_hz > 0:
            raise ConfigError("fs_hz must be positive")
        if not np.all(np.isfinite(x)):
            raise ConfigError("waveform samples must be finite")
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return len(self) / self.fs_hz


@dataclass(frozen=True, eq=False)
class CorrelationResult:
    lags: np.ndarray
    values: np.ndarray
    peak_lag_s: float
    fs_hz: float

    @property
    def peak_value(self) -> float:
        return float(self.values.max())


# -- source generators ---------------------------------------------------------


def white_noise(n: int, fs_hz: float = 44100.0, seed=None) -> Waveform:
    return Waveform(np.random.default_rng(seed).standard_normal(n), fs_hz)


def bandlimited_noise(n: int, fs_hz: float = 44100.0, cutoff_frac: float = 0.4, seed=None) -> Waveform:
    """White noise low-passed to ``cutoff_frac`` of the sampling rate."""
    pad = 512
    x = np.random.default_rng(seed).standard_normal(n + 2 * pad)
    taps = signal.firwin(255, cutoff_frac * 2.0)
    y = signal.fftconvolve(x, taps, mode="same")[pad:-pad]
    return Waveform(y / np.std(y), fs_hz)


def multitone(n: int, freqs_hz: Sequence[float], fs_hz: float = 44100.0, seed=None) -> Waveform:
    """Sum of unit sinusoids with random phases."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) / fs_hz
    x = sum(np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi)) for f in freqs_hz)
    return Waveform(np.asarray(x, dtype=float), fs_hz)


# -- delay and mixing -------------------------------------------------------------


def _fractional_kernel(frac: float, taps: int = FRACTIONAL_TAPS) -> np.ndarray:
    half = taps // 2
    x = np.arange(-half, half + 1) - frac
    window = np.cos(np.pi * x / (2 * (half + 1))) ** 2
    h = np.sinc(x) * window
    return h / h.sum()


def advance(x: np.ndarray, shift: float, taps: int = FRACTIONAL_TAPS) -> np.ndarray:
    """Return ``y[n] = x(n + shift)`` by windowed-sinc interpolation, zero outside ``x``."""
    n0 = math.floor(shift)
    frac = shift - n0
    if frac == 0.0:
        y = np.zeros_like(x)
        if n0 >= 0:
            y[: x.size - n0] = x[n0:]
        else:
            y[-n0:] = x[: x.size + n0]
        return y
    half = taps // 2
    h = _fractional_kernel(frac, taps)
    # y[n] = sum_j h[j] x[n + n0 + j - half]
    padded = np.concatenate([np.zeros(taps + abs(n0)), x, np.zeros(taps + abs(n0))])
    base = taps + abs(n0) + n0 - half
    full = np.correlate(padded, h, mode="valid")
    return full[base : base + x.size]


def synth_mic_pair(src: Waveform, delay_s: float, delta: float = 1.0, noise_sigma: float = 0.0, seed=None):
    """Two microphone signals ``y1 = s + n1`` and ``y2 = delta * s(t + delay) + n2``."""
    if not 0 < delta <= 1:
        raise ConfigError("delta must be in (0, 1]")
    if abs(delay_s) >= src.duration_s:
        raise DelayOutOfRange(f"|delay| {abs(delay_s)} s exceeds source duration {src.duration_s} s")
    rng = np.random.default_rng(seed)
    s = src.samples
    y1 = s.copy()
    y2 = delta * advance(s, delay_s * src.fs_hz)
    if noise_sigma > 0:
        y1 = y1 + rng.normal(0.0, noise_sigma, s.size)
        y2 = y2 + rng.normal(0.0, noise_sigma, s.size)
    return Waveform(y1, src.fs_hz), Waveform(y2, src.fs_hz)


# -- correlation ------------------------------------------------------------------


def cross_correlate(y1: Waveform, y2: Waveform, max_lag_s: float) -> CorrelationResult:
    """Unbiased cross-correlation over ``|lag| <= max_lag_s`` with parabolic peak refinement."""
    if y1.fs_hz != y2.fs_hz:
        raise MismatchedRates(f"{y1.fs_hz} Hz vs {y2.fs_hz} Hz")
    fs = y1.fs_hz
    if max_lag_s * fs < 1:
        raise ConfigError("max_lag_s must span at least one sample")
    a, b = y1.samples, y2.samples
    n = min(a.size, b.size)
    a, b = a[:n], b[:n]
    max_lag = min(int(math.ceil(max_lag_s * fs)), n - 1)
    lags = np.arange(-max_lag, max_lag + 1)
    values = np.empty(lags.size)
    for i, k in enumerate(lags):
        if k >= 0:
            values[i] = np.dot(a[k:], b[: n - k]) / (n - k)
        else:
            values[i] = np.dot(a[: n + k], b[-k:]) / (n + k)

    p = int(np.argmax(values))
    offset = 0.0
    if 0 < p < values.size - 1:
        left, mid, right = values[p - 1], values[p], values[p + 1]
        denom = left - 2 * mid + right
        if denom < 0:
            offset = float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))
    return CorrelationResult(lags, values, (lags[p] + offset) / fs, fs)


def estimate_itd(y1: Waveform, y2: Waveform, array: ArrayConfig) -> float:
    """Path-length difference ``T * c0`` in meters; may slightly exceed ``2b`` under noise."""
    res = cross_correlate(y1, y2, MAX_LAG_MARGIN * array.max_delay_s)
    return res.peak_lag_s * array.sound_speed_m_s


# -- rotation ---------------------------------------------------------------------


def rotational_itd_track(
    scene: Scene,
    array: ArrayConfig,
    src_waveforms: Sequence[Waveform],
    frame_len: int = 2048,
    params: SimParams | None = None,
    mic_noise_sigma: float = 0.0,
) -> ItdSignal:
    """ITD per rotation step from mixed microphone frames.

    Each step mixes every active source into both channels with the delay
    implied by the current array heading, then estimates the frame ITD by
    cross-correlation. Source activity follows the scene duty cycles under
    ``params.seed``; ``params.noise_sigma_m`` is not used here, microphone noise
    is set by ``mic_noise_sigma``.
    """
    params = params or SimParams(noise_sigma_m=0.0)
    if len(src_waveforms) != len(scene.sources):
        raise ConfigError("need exactly one waveform per source")
    fs = src_waveforms[0].fs_hz
    if any(w.fs_hz != fs for w in src_waveforms):
        raise MismatchedRates("source waveforms must share one sampling rate")
    max_lag = int(math.ceil(MAX_LAG_MARGIN * array.max_delay_s * fs))
    if frame_len < 2 * max_lag:
        raise FrameTooShort(f"frame_len {frame_len} < 2 x max lag {max_lag}")
    pad = max_lag + FRACTIONAL_TAPS
    seg = frame_len + 2 * pad
    if any(len(w) < seg for w in src_waveforms):
        raise FrameTooShort(f"source waveforms must hold at least {seg} samples")

    rng = np.random.default_rng(params.seed)
    t = sample_times(array, params.rotations)
    active = activity_mask(scene, t.size, rng)
    noise_rng = np.random.default_rng(rng.integers(2**63))
    theta = np.radians([s.elevation_deg for s in scene.sources])
    phi = np.radians([s.azimuth_deg for s in scene.sources])

    d = np.empty(t.size)
    for i, ti in enumerate(t):
        y1 = np.zeros(frame_len)
        y2 = np.zeros(frame_len)
        delays = array.baseline_m * np.cos(theta) * np.sin(phi - array.omega_rad_s * ti) / array.sound_speed_m_s
        for k, w in enumerate(src_waveforms):
            if not active[k, i]:
                continue
            start = (i * frame_len) % (len(w) - seg + 1)
            chunk = w.samples[start : start + seg]
            y1 += chunk[pad:-pad]
            y2 += advance(chunk, delays[k] * fs)[pad:-pad]
        if mic_noise_sigma > 0:
            y1 += noise_rng.normal(0.0, mic_noise_sigma, frame_len)
            y2 += noise_rng.normal(0.0, mic_noise_sigma, frame_len)
        d[i] = estimate_itd(Waveform(y1, fs), Waveform(y2, fs), array)
    return ItdSignal(t, d, array)
