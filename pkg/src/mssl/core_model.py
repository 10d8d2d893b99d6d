"""Geometric ITD model of a self-rotating two-microphone array.

A far-field source at elevation ``theta`` and azimuth ``phi`` produces, while the
array spins at ``omega`` about its midpoint, the path-length difference

    d(t) = 2 b cos(theta) sin(phi - omega t)

so the amplitude encodes elevation and the phase encodes azimuth. This module
holds that model, the closed-form recovery of (amplitude, phase) from two samples
and small angle helpers shared by the estimators.

Angles cross every public boundary in degrees; radians are used internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DegeneratePair, ZeroSignal

#: ``|sin(omega (t2 - t1))|`` below this rejects a sample pair.
DEGENERACY_TOL = 1e-6


@dataclass(frozen=True)
class SourceSpec:
    """Ground-truth sound source. Distance is metadata under the far-field model."""

    azimuth_deg: float
    elevation_deg: float
    distance_m: float = 5.0
    duty: float = 1.0

    def __post_init__(self):
        if not -180.0 < self.azimuth_deg <= 180.0:
            raise ConfigError(f"azimuth_deg must be in (-180, 180], got {self.azimuth_deg}")
        if not 0.0 <= self.elevation_deg <= 90.0:
            raise ConfigError(f"elevation_deg must be in [0, 90], got {self.elevation_deg}")
        if not self.distance_m > 0:
            raise ConfigError(f"distance_m must be positive, got {self.distance_m}")
        if not 0.0 < self.duty <= 1.0:
            raise ConfigError(f"duty must be in (0, 1], got {self.duty}")

    @classmethod
    def at(cls, azimuth_deg: float, elevation_deg: float, **kw) -> "SourceSpec":
        """Build a source, wrapping any azimuth into (-180, 180]."""
        return cls(wrap_deg(azimuth_deg), elevation_deg, **kw)


@dataclass(frozen=True)
class ArrayConfig:
    """Bi-microphone geometry and rotation.

    ``half_baseline_m`` is half the microphone separation; 0.09 m matches a
    human-head-sized 0.18 m spacing. ``omega_rad_s`` may be negative.
    """

    half_baseline_m: float = 0.09
    omega_rad_s: float = 2 * math.pi / 60
    samples_per_rotation: int = 360
    sound_speed_m_s: float = 345.0

    def __post_init__(self):
        if not self.half_baseline_m > 0:
            raise ConfigError("half_baseline_m must be positive")
        if self.omega_rad_s == 0 or not math.isfinite(self.omega_rad_s):
            raise ConfigError("omega_rad_s must be finite and nonzero")
        if int(self.samples_per_rotation) != self.samples_per_rotation or self.samples_per_rotation < 4:
            raise ConfigError("samples_per_rotation must be an integer >= 4")
        if not self.sound_speed_m_s > 0:
            raise ConfigError("sound_speed_m_s must be positive")

    @property
    def baseline_m(self) -> float:
        return 2.0 * self.half_baseline_m

    @property
    def period_s(self) -> float:
        return 2 * math.pi / abs(self.omega_rad_s)

    @property
    def step_s(self) -> float:
        return self.period_s / self.samples_per_rotation

    @property
    def max_delay_s(self) -> float:
        return self.baseline_m / self.sound_speed_m_s


class ItdSample(NamedTuple):
    t_s: float
    d_m: float


@dataclass(frozen=True, eq=False)
class ItdSignal:
    """Time-stamped ITD samples, stored column-wise.

    ``t_s`` must be non-negative and strictly increasing.
    """

    t_s: np.ndarray
    d_m: np.ndarray
    array: ArrayConfig = field(default_factory=ArrayConfig)

    def __post_init__(self):
        t = np.asarray(self.t_s, dtype=float).reshape(-1)
        d = np.asarray(self.d_m, dtype=float).reshape(-1)
        if t.shape != d.shape:
            raise ConfigError("t_s and d_m must have the same length")
        if t.size and t[0] < 0:
            raise ConfigError("timestamps must be non-negative")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(d))):
            raise ConfigError("ITD samples must be finite")
        t.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "t_s", t)
        object.__setattr__(self, "d_m", d)

    @classmethod
    def from_samples(cls, samples: Sequence[tuple[float, float]], array: ArrayConfig | None = None) -> "ItdSignal":
        arr = np.asarray(list(samples), dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], array or ArrayConfig())

    def __len__(self) -> int:
        return int(self.t_s.size)

    def __iter__(self) -> Iterator[ItdSample]:
        return (ItdSample(float(t), float(d)) for t, d in zip(self.t_s, self.d_m))

    @property
    def samples(self) -> list[ItdSample]:
        return list(self)

    def covers_rotation(self) -> bool:
        if len(self) < 2:
            return False
        span = self.t_s[-1] - self.t_s[0]
        return span >= self.array.period_s - self.array.step_s * (1 + 1e-9)

    def subset(self, idx) -> "ItdSignal":
        return ItdSignal(self.t_s[idx], self.d_m[idx], self.array)


@dataclass(frozen=True)
class SineFit:
    amplitude_m: float
    phase_deg: float


@dataclass(frozen=True)
class OrientationEstimate:
    theta_deg: float
    phi_deg: float
    support: int
    confidence_pct: float
    amplitude_m: float | None = None


@dataclass(frozen=True)
class LocalizationResult:
    estimates: list[OrientationEstimate]

    @property
    def count(self) -> int:
        return len(self.estimates)


def wrap_deg(angle):
    """Wrap degrees into (-180, 180]."""
    a = np.mod(np.asarray(angle, dtype=float), 360.0)
    a = np.where(a > 180.0, a - 360.0, a)
    # -0.0 and the exact -180 boundary both collapse onto the half-open interval
    a = np.where(a <= -180.0, a + 360.0, a) + 0.0
    return float(a) if a.ndim == 0 else a


def angular_distance(a_deg, b_deg):
    """Smallest absolute difference between two azimuths, in [0, 180]."""
    diff = np.mod(np.abs(np.asarray(a_deg, dtype=float) - np.asarray(b_deg, dtype=float)), 360.0)
    out = np.minimum(diff, 360.0 - diff)
    return float(out) if out.ndim == 0 else out


def circular_mean_deg(angles_deg) -> float:
    rad = np.deg2rad(np.asarray(angles_deg, dtype=float))
    return wrap_deg(math.degrees(math.atan2(np.sin(rad).sum(), np.cos(rad).sum())))


def itd_model(source: SourceSpec, array: ArrayConfig, t):
    """Path-length difference ``2 b cos(theta) sin(phi - omega t)`` in meters."""
    theta = math.radians(source.elevation_deg)
    phi = math.radians(source.azimuth_deg)
    out = array.baseline_m * math.cos(theta) * np.sin(phi - array.omega_rad_s * np.asarray(t, dtype=float))
    return float(out) if out.ndim == 0 else out


def theta_from_amplitude(amplitude_m, half_baseline_m: float):
    """Elevation in degrees from sinusoid amplitude; ``A > 2b`` clamps to 0."""
    ratio = np.clip(np.asarray(amplitude_m, dtype=float) / (2.0 * half_baseline_m), 0.0, 1.0)
    out = np.degrees(np.arccos(ratio))
    return float(out) if out.ndim == 0 else out


def solve_pairs(y1, t1, y2, t2, omega: float):
    """Vectorised two-point sinusoid recovery.

    Returns ``(amplitude, phase_rad, valid)``. ``valid`` is False where the pair
    is degenerate or both samples are zero; the other outputs are NaN there.
    ``d(t) = A sin(phi - omega t) = A sin(phi) cos(omega t) - A cos(phi) sin(omega t)``,
    so with ``d = A1 sin + A2 cos`` we have ``A2 = A sin(phi)`` and ``A1 = -A cos(phi)``.
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    w1 = omega * np.asarray(t1, dtype=float)
    w2 = omega * np.asarray(t2, dtype=float)
    s1, c1 = np.sin(w1), np.cos(w1)
    s2, c2 = np.sin(w2), np.cos(w2)
    den = np.sin(w2 - w1)
    valid = (np.abs(den) >= DEGENERACY_TOL) & ~((y1 == 0) & (y2 == 0))
    safe = np.where(valid, den, 1.0)
    sin_part = (y1 * s2 - y2 * s1) / safe  # A sin(phi)
    neg_cos_part = (y2 * c1 - y1 * c2) / safe  # -A cos(phi)
    amp = np.hypot(sin_part, neg_cos_part)
    phase = np.arctan2(sin_part, -neg_cos_part)
    amp = np.where(valid, amp, np.nan)
    phase = np.where(valid, phase, np.nan)
    return amp, phase, valid


def solve_two_point(y1: float, t1: float, y2: float, t2: float, omega: float) -> SineFit:
    """Recover the unique ``A >= 0, phi`` with ``A sin(phi - omega t_i) = y_i``.

    Raises
    ------
    DegeneratePair
        If ``|sin(omega (t2 - t1))| < DEGENERACY_TOL``.
    ZeroSignal
        If both samples are exactly zero.
    """
    if abs(math.sin(omega * t2 - omega * t1)) < DEGENERACY_TOL:
        raise DegeneratePair(f"samples at t={t1} and t={t2} are half a rotation apart")
    if y1 == 0 and y2 == 0:
        raise ZeroSignal("both samples are zero; phase undefined")
    amp, phase, _ = solve_pairs(y1, t1, y2, t2, omega)
    return SineFit(float(amp), wrap_deg(math.degrees(float(phase))))


def draw_valid_pairs(t, d, omega, n, rng, max_tries=100, max_amplitude=None):
    """Draw ``n`` index pairs ``i != j`` that give a well-posed two-point fit.

    Pairs that are degenerate, all-zero or (when ``max_amplitude`` is given)
    imply a larger amplitude are redrawn. Returns ``(i, j, amp, phase_rad)``
    with exactly ``n`` entries unless ``max_tries * n`` draws were not enough,
    in which case whatever was found is returned.
    """
    m = t.size
    got_i, got_j, got_a, got_p = [], [], [], []
    have, drawn = 0, 0
    while have < n and drawn < max_tries * n:
        size = max(n - have, 16)
        i = rng.integers(0, m, size)
        j = rng.integers(0, m - 1, size)
        j = j + (j >= i)  # distinct from i
        drawn += size
        amp, phase, ok = solve_pairs(d[i], t[i], d[j], t[j], omega)
        if max_amplitude is not None:
            ok &= amp <= max_amplitude
        take = np.flatnonzero(ok)[: n - have]
        got_i.append(i[take])
        got_j.append(j[take])
        got_a.append(amp[take])
        got_p.append(phase[take])
        have += take.size
    cat = lambda xs: np.concatenate(xs) if xs else np.empty(0)
    return cat(got_i).astype(int), cat(got_j).astype(int), cat(got_a), cat(got_p)
