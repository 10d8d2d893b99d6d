"""Monte Carlo evaluation: source-count confusion matrices and localization MAE.

Each (true K, run index) gets its own seed sequence derived from the master
seed, so any subset of runs can be reproduced on its own and runs can execute
in any order or in parallel.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core_model import ArrayConfig, OrientationEstimate, SourceSpec, angular_distance
from .dbscan_mssl import DbscanParams, localize_dbscan
from .errors import ConfigError, MsslError
from .ransac_mssl import RansacParams, localize_ransac
from .scene_sim import SimParams, random_scene, synthesize_itd

log = logging.getLogger(__name__)

ESTIMATORS = ("dbscan", "ransac")


@dataclass(frozen=True)
class SceneConstraints:
    min_azimuth_sep_deg: float = 20.0
    min_elevation_sep_deg: float = 10.0
    distance_m: float = 5.0


@dataclass(frozen=True)
class EvalConfig:
    k_values: tuple[int, ...] = (1, 2, 3, 4, 5)
    runs_per_k: int = 200
    estimator: str = "both"
    ransac: RansacParams = field(default_factory=RansacParams)
    dbscan: DbscanParams = field(default_factory=DbscanParams)
    constraints: SceneConstraints = field(default_factory=SceneConstraints)
    sim: SimParams = field(default_factory=SimParams)
    array: ArrayConfig = field(default_factory=ArrayConfig)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        if not self.k_values or min(self.k_values) < 1:
            raise ConfigError("k_values must be a nonempty list of positive counts")
        if self.runs_per_k < 1:
            raise ConfigError("runs_per_k must be >= 1")
        if self.estimator not in ESTIMATORS + ("both",):
            raise ConfigError(f"estimator must be dbscan, ransac or both, not {self.estimator!r}")

    @property
    def estimators(self) -> tuple[str, ...]:
        return ESTIMATORS if self.estimator == "both" else (self.estimator,)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalConfig":
        data = dict(data)
        sub = {
            "ransac": RansacParams,
            "dbscan": DbscanParams,
            "constraints": SceneConstraints,
            "sim": SimParams,
            "array": ArrayConfig,
        }
        try:
            for key, kind in sub.items():
                if key in data:
                    data[key] = kind(**data[key])
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad evaluation config: {exc}") from None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["k_values"] = list(self.k_values)
        for key in ("ransac", "dbscan", "sim"):
            out[key].pop("seed", None)
        return out


def load_eval_config(path) -> EvalConfig:
    try:
        return EvalConfig.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


# -- matching -----------------------------------------------------------------------


@dataclass(frozen=True)
class Pairing:
    pairs: list[tuple[int, int]]
    misses: list[int]
    false_alarms: list[int]


def orientation_gap(theta_a, phi_a, theta_b, phi_b) -> float:
    return math.hypot(theta_a - theta_b, angular_distance(phi_a, phi_b))


def match_estimates(truth: Sequence[SourceSpec], estimates: Sequence[OrientationEstimate]) -> Pairing:
    """Greedy nearest-first pairing of truths to estimates.

    Distance is Euclidean over (elevation difference, circular azimuth difference).
    Returns index pairs ``(truth_idx, estimate_idx)``.
    """
    cand = sorted(
        (orientation_gap(s.elevation_deg, s.azimuth_deg, e.theta_deg, e.phi_deg), i, j)
        for i, s in enumerate(truth)
        for j, e in enumerate(estimates)
    )
    used_t, used_e, pairs = set(), set(), []
    for _, i, j in cand:
        if i in used_t or j in used_e:
            continue
        used_t.add(i)
        used_e.add(j)
        pairs.append((i, j))
    pairs.sort()
    return Pairing(
        pairs,
        [i for i in range(len(truth)) if i not in used_t],
        [j for j in range(len(estimates)) if j not in used_e],
    )


# -- reports ------------------------------------------------------------------------


@dataclass
class ConfusionMatrix:
    """Rows are true source counts, columns estimated counts ``0..max``."""

    k_values: tuple[int, ...]
    counts: np.ndarray

    @classmethod
    def from_runs(cls, k_values, runs: list[dict], estimator: str) -> "ConfusionMatrix":
        mine = [r for r in runs if r["estimator"] == estimator]
        width = max([max(k_values)] + [r["k_hat"] for r in mine]) + 1
        counts = np.zeros((len(k_values), width), dtype=int)
        row = {k: i for i, k in enumerate(k_values)}
        for r in mine:
            counts[row[r["k"]], r["k_hat"]] += 1
        return cls(tuple(k_values), counts)

    def correct(self, k: int) -> int:
        return int(self.counts[self.k_values.index(k), k])

    def rate(self, k: int) -> float:
        row = self.counts[self.k_values.index(k)]
        return self.correct(k) / row.sum()

    def total_rate(self, ks=None) -> float:
        ks = self.k_values if ks is None else ks
        return sum(self.correct(k) for k in ks) / sum(self.counts[self.k_values.index(k)].sum() for k in ks)

    def rows(self):
        for k, row in zip(self.k_values, self.counts):
            yield [k, *row.tolist()]

    def header(self):
        return ["true_k", *(f"est_{j}" for j in range(self.counts.shape[1]))]


@dataclass(frozen=True)
class MaeRow:
    k: int
    azimuth_mae_deg: float
    elevation_mae_deg: float
    correct_runs: int
    matched_pairs: int
    miss_rate: float
    false_alarm_rate: float

    @property
    def orientation_mae_deg(self) -> float:
        return 0.5 * (self.azimuth_mae_deg + self.elevation_mae_deg)


@dataclass
class MaeReport:
    """Per true K: MAE over runs whose count was right; miss/false-alarm rates over all runs."""

    rows: dict[int, MaeRow]

    @classmethod
    def from_runs(cls, k_values, runs: list[dict], estimator: str) -> "MaeReport":
        rows = {}
        for k in k_values:
            mine = [r for r in runs if r["estimator"] == estimator and r["k"] == k]
            good = [r for r in mine if r["k_hat"] == k]
            az = [e for r in good for e in r["az_err"]]
            el = [e for r in good for e in r["el_err"]]
            truths = k * len(mine)
            n_est = sum(r["k_hat"] for r in mine)
            rows[k] = MaeRow(
                k,
                float(np.mean(az)) if az else math.nan,
                float(np.mean(el)) if el else math.nan,
                len(good),
                len(az),
                sum(r["misses"] for r in mine) / truths if truths else math.nan,
                sum(r["false_alarms"] for r in mine) / n_est if n_est else 0.0,
            )
        return cls(rows)

    def mean_orientation_mae(self, ks=None) -> float:
        ks = list(self.rows) if ks is None else ks
        return float(np.mean([self.rows[k].orientation_mae_deg for k in ks]))

    def header(self):
        return ["true_k", "azimuth_mae_deg", "elevation_mae_deg", "correct_runs", "matched_pairs", "miss_rate", "false_alarm_rate"]

    def table(self):
        for r in self.rows.values():
            yield [r.k, r.azimuth_mae_deg, r.elevation_mae_deg, r.correct_runs, r.matched_pairs, r.miss_rate, r.false_alarm_rate]


@dataclass
class EvalResult:
    config: EvalConfig
    runs: list[dict]
    confusion: dict[str, ConfusionMatrix]
    mae: dict[str, MaeReport]

    def summary(self) -> str:
        lines = [f"runs per K: {self.config.runs_per_k}, K values: {list(self.config.k_values)}, seed {self.config.seed}"]
        for est in self.config.estimators:
            cm, mae = self.confusion[est], self.mae[est]
            lines.append(f"[{est}] correct-count rate overall {cm.total_rate():.3f}")
            for k in self.config.k_values:
                r = mae.rows[k]
                lines.append(
                    f"  K={k}: count rate {cm.rate(k):.3f}  MAE azimuth {r.azimuth_mae_deg:.2f} deg"
                    f"  elevation {r.elevation_mae_deg:.2f} deg"
                )
        return "\n".join(lines)


# -- running --------------------------------------------------------------------------


def run_seeds(master_seed: int, k: int, run: int) -> list[np.random.SeedSequence]:
    """Scene, simulation, RANSAC and DBSCAN seeds for one (K, run) cell."""
    return np.random.SeedSequence(master_seed, spawn_key=(k, run)).spawn(4)


def evaluate_run(config: EvalConfig, k: int, run: int) -> list[dict]:
    """One Monte Carlo cell; failures are logged and recorded as ``k_hat = 0``."""
    s_scene, s_sim, s_ransac, s_dbscan = run_seeds(config.seed, k, run)
    c = config.constraints
    try:
        scene = random_scene(k, s_scene, c.min_azimuth_sep_deg, c.min_elevation_sep_deg, c.distance_m)
        itd = synthesize_itd(scene, config.array, replace(config.sim, seed=s_sim))
    except MsslError as exc:
        log.warning("K=%d run=%d scene failed: %s", k, run, exc)
        return [
            {"k": k, "run": run, "estimator": est, "error": str(exc), "k_hat": 0,
             "az_err": [], "el_err": [], "misses": k, "false_alarms": 0}
            for est in config.estimators
        ]
    out = []
    for est in config.estimators:
        rec = {"k": k, "run": run, "estimator": est, "error": ""}
        try:
            if est == "ransac":
                result = localize_ransac(itd, replace(config.ransac, seed=s_ransac))
            else:
                result = localize_dbscan(itd, replace(config.dbscan, seed=s_dbscan))
            estimates = result.estimates
        except MsslError as exc:
            log.warning("K=%d run=%d %s failed: %s", k, run, est, exc)
            rec["error"] = str(exc)
            estimates = []
        pairing = match_estimates(scene.sources, estimates)
        rec["k_hat"] = len(estimates)
        rec["az_err"] = [angular_distance(scene.sources[i].azimuth_deg, estimates[j].phi_deg) for i, j in pairing.pairs]
        rec["el_err"] = [abs(scene.sources[i].elevation_deg - estimates[j].theta_deg) for i, j in pairing.pairs]
        rec["misses"] = len(pairing.misses)
        rec["false_alarms"] = len(pairing.false_alarms)
        out.append(rec)
    return out


def _evaluate_cell(args):
    return evaluate_run(*args)


def run_eval(config: EvalConfig, workers: int = 1) -> EvalResult:
    cells = [(config, k, run) for k in config.k_values for run in range(config.runs_per_k)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_evaluate_cell, cells, chunksize=8))
    else:
        chunks = [_evaluate_cell(c) for c in cells]
    runs = [r for chunk in chunks for r in chunk]
    log.info("evaluated %d runs", len(runs))
    confusion = {e: ConfusionMatrix.from_runs(config.k_values, runs, e) for e in config.estimators}
    mae = {e: MaeReport.from_runs(config.k_values, runs, e) for e in config.estimators}
    return EvalResult(config, runs, confusion, mae)
