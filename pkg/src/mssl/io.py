"""File formats: scene JSON, ITD/point/trace CSV tables and mono WAV input.

Scene file (JSON)::

    {
      "min_azimuth_sep_deg": 20,        # optional
      "min_elevation_sep_deg": 10,      # optional
      "sources": [
        {"azimuth_deg": 20, "elevation_deg": 10, "distance_m": 5, "duty": 1.0}
      ]
    }

``distance_m`` and ``duty`` are optional per source. ITD signals are CSV with the
header ``t_s,d_m``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.io import wavfile

from .core_model import ArrayConfig, ItdSignal, LocalizationResult, SourceSpec, theta_from_amplitude
from .errors import ConfigError
from .scene_sim import Scene
from .waveform_itd import Waveform

ITD_HEADER = ("t_s", "d_m")
POINTS_HEADER = ("theta_deg", "phi_deg", "cluster_id")
TRACE_HEADER = ("source_rank", "A_m", "phi_deg", "theta_deg", "count", "confidence_pct")
RESULT_HEADER = ("rank", "theta_deg", "phi_deg", "support", "confidence_pct")

_SOURCE_KEYS = {"azimuth_deg", "elevation_deg", "distance_m", "duty"}


def scene_from_dict(data: dict) -> Scene:
    if not isinstance(data, dict) or "sources" not in data:
        raise ConfigError("scene must be an object with a 'sources' list")
    sources = []
    for i, entry in enumerate(data["sources"]):
        if not isinstance(entry, dict):
            raise ConfigError(f"source {i} must be an object")
        unknown = set(entry) - _SOURCE_KEYS
        if unknown:
            raise ConfigError(f"source {i}: unknown keys {sorted(unknown)}")
        try:
            sources.append(SourceSpec(**{k: float(v) for k, v in entry.items()}))
        except TypeError as exc:
            raise ConfigError(f"source {i}: {exc}") from None
    return Scene(
        tuple(sources),
        float(data.get("min_azimuth_sep_deg", 20.0)),
        float(data.get("min_elevation_sep_deg", 10.0)),
    )


def scene_to_dict(scene: Scene) -> dict:
    return {
        "min_azimuth_sep_deg": scene.min_azimuth_sep_deg,
        "min_elevation_sep_deg": scene.min_elevation_sep_deg,
        "sources": [
            {"azimuth_deg": s.azimuth_deg, "elevation_deg": s.elevation_deg, "distance_m": s.distance_m, "duty": s.duty}
            for s in scene.sources
        ],
    }


def load_scene(path) -> Scene:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return scene_from_dict(data)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def save_itd_csv(itd: ItdSignal, path) -> None:
    write_csv(path, ITD_HEADER, ((repr(float(t)), repr(float(d))) for t, d in zip(itd.t_s, itd.d_m)))


def load_itd_csv(path, array: ArrayConfig | None = None) -> ItdSignal:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ITD_HEADER:
            raise ConfigError(f"{path}: expected header 't_s,d_m', got {header}")
        try:
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: bad row ({exc})") from None
    return ItdSignal.from_samples(rows, array)


def save_points_csv(points: np.ndarray, labels: np.ndarray, path) -> None:
    write_csv(path, POINTS_HEADER, ((repr(float(p[0])), repr(float(p[1])), int(c)) for p, c in zip(points, labels)))


def save_trace_csv(trace, half_baseline_m: float, path) -> None:
    rows = (
        (rank, r.fit.amplitude_m, r.fit.phase_deg, theta_from_amplitude(r.fit.amplitude_m, half_baseline_m), r.count, c)
        for rank, (r, c) in enumerate(zip(trace.records, trace.confidences))
    )
    write_csv(path, TRACE_HEADER, rows)


def save_assignment_csv(itd: ItdSignal, trace, path) -> None:
    """Per-sample RANSAC assignment: the rank of the fit that removed it, or -1."""
    rank = np.full(len(itd), -1, dtype=int)
    for k, r in enumerate(trace.records):
        rank[r.inlier_indices] = k
    write_csv(path, ("t_s", "d_m", "source_rank"), zip(itd.t_s.tolist(), itd.d_m.tolist(), rank.tolist()))


def result_rows(result: LocalizationResult):
    return [(k, e.theta_deg, e.phi_deg, e.support, e.confidence_pct) for k, e in enumerate(result.estimates)]


def read_wav(path) -> Waveform:
    """Read a mono PCM WAV (16-bit integer or 32-bit float) scaled to about [-1, 1]."""
    fs, data = wavfile.read(path)
    if data.ndim != 1:
        raise ConfigError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    else:
        raise ConfigError(f"{path}: unsupported sample format {data.dtype}")
    return Waveform(x, float(fs))


def write_wav(waveform: Waveform, path, dtype=np.float32) -> None:
    x = waveform.samples
    if np.dtype(dtype) == np.int16:
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = x.astype(np.float32)
    wavfile.write(path, int(round(waveform.fs_hz)), data)
