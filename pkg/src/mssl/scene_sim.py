"""Direct ITD-domain simulation of a rotating array observing several sources.

One ITD value is emitted per rotation step. Concurrent sources do not add in the
ITD domain; each sample is attributed to a single active source (the one that
would dominate the cross-correlation peak) and Gaussian sensor noise is added.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core_model import ArrayConfig, ItdSignal, SourceSpec, angular_distance, itd_model
from .errors import ConfigError, ConstraintUnsatisfiable, EmptyScene

Assignment = Literal["uniform", "power-weighted"]


@dataclass(frozen=True)
class Scene:
    sources: tuple[SourceSpec, ...] = ()
    min_azimuth_sep_deg: float = 20.0
    min_elevation_sep_deg: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))

    def satisfies_separation(self) -> bool:
        for a, b in itertools.combinations(self.sources, 2):
            if angular_distance(a.azimuth_deg, b.azimuth_deg) < self.min_azimuth_sep_deg:
                return False
            if abs(a.elevation_deg - b.elevation_deg) < self.min_elevation_sep_deg:
                return False
        return True


@dataclass(frozen=True)
class SimParams:
    """Simulation knobs. ``noise_sigma_m`` is a standard deviation in meters."""

    rotations: int = 1
    noise_sigma_m: float = 0.001
    seed: object = None
    assignment: Assignment = "uniform"

    def __post_init__(self):
        if int(self.rotations) != self.rotations or self.rotations < 1:
            raise ConfigError("rotations must be a positive integer")
        if not self.noise_sigma_m >= 0:
            raise ConfigError("noise_sigma_m must be non-negative")
        if self.assignment not in ("uniform", "power-weighted"):
            raise ConfigError(f"unknown assignment policy {self.assignment!r}")


def sample_times(array: ArrayConfig, rotations: int = 1) -> np.ndarray:
    n = rotations * array.samples_per_rotation
    return np.arange(n) * array.step_s


def activity_mask(scene: Scene, n: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean ``(n_sources, n)`` mask; a source with duty ``u`` is on for ``round(u n)`` samples."""
    mask = np.ones((len(scene.sources), n), dtype=bool)
    for k, src in enumerate(scene.sources):
        if src.duty < 1.0:
            on = int(round(src.duty * n))
            mask[k] = False
            mask[k, rng.permutation(n)[:on]] = True
    return mask


def source_weights(scene: Scene, policy: Assignment) -> np.ndarray:
    if policy == "uniform":
        return np.ones(len(scene.sources))
    # received power falls off with squared distance
    return np.array([1.0 / s.distance_m**2 for s in scene.sources])


def assign_sources(mask: np.ndarray, weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Pick one active source per sample, or -1 where none is active."""
    w = mask * weights[:, None]
    total = w.sum(axis=0)
    u = rng.random(mask.shape[1]) * total
    cum = np.cumsum(w, axis=0)
    choice = (cum <= u[None, :]).sum(axis=0)
    choice = np.minimum(choice, mask.shape[0] - 1)
    return np.where(total > 0, choice, -1)


def synthesize_with_labels(scene: Scene, array: ArrayConfig, params: SimParams) -> tuple[ItdSignal, np.ndarray]:
    """Like :func:`synthesize_itd` but also returns the generating source index per sample."""
    if not scene.sources:
        raise EmptyScene("scene has no sources")
    rng = np.random.default_rng(params.seed)
    t = sample_times(array, params.rotations)
    mask = activity_mask(scene, t.size, rng)
    labels = assign_sources(mask, source_weights(scene, params.assignment), rng)

    curves = np.stack([itd_model(s, array, t) for s in scene.sources])
    d = np.zeros(t.size)
    on = labels >= 0
    d[on] = curves[labels[on], np.nonzero(on)[0]]
    if params.noise_sigma_m > 0:
        d = d + rng.normal(0.0, params.noise_sigma_m, size=t.size)
    return ItdSignal(t, d, array), labels


def synthesize_itd(scene: Scene, array: ArrayConfig, params: SimParams) -> ItdSignal:
    return synthesize_with_labels(scene, array, params)[0]


def _circular_gaps_ok(az: np.ndarray, sep: float) -> np.ndarray:
    s = np.sort(az, axis=-1)
    gaps = np.diff(s, axis=-1)
    wrap = s[..., :1] + 360.0 - s[..., -1:]
    return np.all(np.concatenate([gaps, wrap], axis=-1) >= sep, axis=-1)


def random_scene(
    k: int,
    seed=None,
    min_azimuth_sep_deg: float = 20.0,
    min_elevation_sep_deg: float = 10.0,
    distance_m: float = 5.0,
    max_attempts: int = 20000,
) -> Scene:
    """Draw ``k`` sources uniformly, conditioned on the pairwise separations.

    Whole scenes are rejection-sampled in vectorised batches so the accepted
    scene is uniform over the feasible set.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k * min_azimuth_sep_deg > 360.0 or (k - 1) * min_elevation_sep_deg > 90.0:
        raise ConstraintUnsatisfiable(
            f"{k} sources cannot be {min_azimuth_sep_deg} deg apart in azimuth "
            f"and {min_elevation_sep_deg} deg apart in elevation"
        )
    rng = np.random.default_rng(seed)
    batch = 256
    for _ in range(0, max_attempts, batch):
        # (−180, 180]: 180 − U[0, 360)
        az = 180.0 - rng.random((batch, k)) * 360.0
        el = rng.random((batch, k)) * 90.0
        ok = _circular_gaps_ok(az, min_azimuth_sep_deg)
        if k > 1:
            ok &= np.all(np.diff(np.sort(el, axis=1), axis=1) >= min_elevation_sep_deg, axis=1)
        hits = np.flatnonzero(ok)
        if hits.size:
            i = hits[0]
            sources = tuple(SourceSpec(float(a), float(e), distance_m) for a, e in zip(az[i], el[i]))
            return Scene(sources, min_azimuth_sep_deg, min_elevation_sep_deg)
    raise ConstraintUnsatisfiable(f"no feasible scene for k={k} after {max_attempts} attempts")
