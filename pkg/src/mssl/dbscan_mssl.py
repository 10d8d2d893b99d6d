"""Source counting and localization by clustering in the orientation domain.

Random sample pairs of the ITD signal are each solved for the sinusoid they
imply and mapped to an (elevation, azimuth) point. Pairs drawn from the same
source pile up at that source's orientation, while mixed pairs scatter. A
density-based clustering then yields one cluster per source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core_model import (
    ItdSignal,
    LocalizationResult,
    OrientationEstimate,
    circular_mean_deg,
    draw_valid_pairs,
    theta_from_amplitude,
    wrap_deg,
)
from .errors import ConfigError, InsufficientData

NOISE = -1
_THETA_OFFSET = 1000.0
_THETA_BOX = 1e5


@dataclass(frozen=True)
class DbscanParams:
    """Clustering and mapping knobs.

    ``amplitude_tolerance`` bounds how far a pair's implied amplitude may exceed
    the physical limit ``2b``: pairs within it are clamped to zero elevation,
    pairs beyond it are redrawn. ``confidence_threshold_pct`` drops clusters
    smaller than that share of the largest one; 0 keeps every cluster.
    """

    epsilon_deg: float = 3.0
    min_points: int = 40
    n_map: int = 10000
    amplitude_tolerance: float = 0.02
    confidence_threshold_pct: float = 10.0
    seed: object = None

    def __post_init__(self):
        if not self.epsilon_deg > 0:
            raise ConfigError("epsilon_deg must be positive")
        if self.min_points < 2:
            raise ConfigError("min_points must be >= 2")
        if self.n_map < self.min_points:
            raise ConfigError("n_map must be >= min_points")
        if not self.amplitude_tolerance >= 0:
            raise ConfigError("amplitude_tolerance must be non-negative")
        if not 0 <= self.confidence_threshold_pct <= 100:
            raise ConfigError("confidence_threshold_pct must be in [0, 100]")


@dataclass(frozen=True)
class OrientationPoint:
    theta_deg: float
    phi_deg: float


@dataclass(frozen=True)
class Cluster:
    members: np.ndarray  # (n, 2) rows of (theta_deg, phi_deg)
    centroid: OrientationPoint

    @property
    def size(self) -> int:
        return int(self.members.shape[0])


@dataclass(frozen=True)
class Clustering:
    points: np.ndarray
    labels: np.ndarray
    core: np.ndarray
    clusters: list[Cluster]

    @property
    def noise(self) -> np.ndarray:
        return self.points[self.labels == NOISE]


def map_to_orientation(itd: ItdSignal, params: DbscanParams, rng=None) -> np.ndarray:
    """Map ``n_map`` valid random sample pairs to ``(theta_deg, phi_deg)`` rows.

    Zero, degenerate and over-amplitude pairs are redrawn and do not count
    toward ``n_map``; after ``100 * n_map`` draws without enough valid pairs the
    signal is rejected.
    """
    if len(itd) < 2:
        raise InsufficientData("need at least two samples to map")
    rng = np.random.default_rng(params.seed) if rng is None else rng
    max_amp = itd.array.baseline_m * (1.0 + params.amplitude_tolerance)
    _, _, amp, phase = draw_valid_pairs(
        itd.t_s, itd.d_m, itd.array.omega_rad_s, params.n_map, rng, max_amplitude=max_amp
    )
    if amp.size < params.n_map:
        raise InsufficientData(f"only {amp.size} usable sample pairs out of {params.n_map} requested")
    theta = theta_from_amplitude(amp, itd.array.half_baseline_m)
    phi = wrap_deg(np.degrees(phase))
    return np.column_stack([theta, phi])


def orientation_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise distance between row sets ``a (n, 2)`` and ``b (m, 2)``.

    Euclidean in degrees with the azimuth difference taken around the circle.
    """
    dth = a[:, None, 0] - b[None, :, 0]
    dph = np.abs(a[:, None, 1] - b[None, :, 1]) % 360.0
    dph = np.minimum(dph, 360.0 - dph)
    return np.sqrt(dth * dth + dph * dph)


def _tree_coords(pts: np.ndarray) -> np.ndarray:
    # periodic box on azimuth only; the elevation box is far wider than any epsilon
    phi = np.mod(pts[:, 1], 360.0)
    phi = np.where(phi >= 360.0, 0.0, phi)
    return np.column_stack([pts[:, 0] + _THETA_OFFSET, phi])


def _tree(coords: np.ndarray) -> cKDTree:
    return cKDTree(coords, boxsize=[_THETA_BOX, 360.0])


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def dbscan(points, params: DbscanParams) -> Clustering:
    """Density-based clustering of orientation points.

    A point is core when more than ``min_points`` points (itself included) lie
    within ``epsilon_deg``. Core points within ``epsilon_deg`` of each other share
    a cluster; a non-core point joins the cluster of its nearest core neighbour
    within ``epsilon_deg``, otherwise it is noise. Cluster ids follow the lowest
    input index among each cluster's core points.

    Core connectivity is resolved on a grid whose cells have diagonal
    ``epsilon_deg``, so every pair of core points sharing a cell is linked
    without a distance check.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    eps = params.epsilon_deg
    labels = np.full(n, NOISE, dtype=int)
    if n == 0:
        return Clustering(pts, labels, np.zeros(0, dtype=bool), [])

    coords = _tree_coords(pts)
    counts = _tree(coords).query_ball_point(coords, eps, return_length=True)
    core = counts > params.min_points
    core_idx = np.flatnonzero(core)

    if core_idx.size:
        cc = coords[core_idx]
        side = eps / np.sqrt(2.0)
        n_phi = max(1, int(np.ceil(360.0 / side)))
        side_phi = 360.0 / n_phi
        cell_th = np.floor(cc[:, 0] / side).astype(int)
        cell_ph = np.minimum(np.floor(cc[:, 1] / side_phi).astype(int), n_phi - 1)
        keys = list(zip(cell_th.tolist(), cell_ph.tolist()))
        cells: dict[tuple[int, int], list[int]] = {}
        for i, key in enumerate(keys):
            cells.setdefault(key, []).append(i)
        cell_list = list(cells)
        cell_pos = {key: k for k, key in enumerate(cell_list)}
        members = [np.asarray(cells[key]) for key in cell_list]
        trees: dict[int, cKDTree] = {}

        uf = _UnionFind(len(cell_list))
        r_th = int(np.ceil(eps / side))
        r_ph = int(np.ceil(eps / side_phi))
        for a, (th, ph) in enumerate(cell_list):
            for dth in range(-r_th, r_th + 1):
                for dph in range(-r_ph, r_ph + 1):
                    b = cell_pos.get((th + dth, (ph + dph) % n_phi))
                    if b is None or b <= a or uf.find(a) == uf.find(b):
                        continue
                    if b not in trees:
                        trees[b] = _tree(cc[members[b]])
                    dist, _ = trees[b].query(cc[members[a]], k=1, distance_upper_bound=eps)
                    if np.any(dist <= eps):
                        uf.union(a, b)

        roots = np.array([uf.find(cell_pos[key]) for key in keys])
        # renumber components by first appearance in input order
        _, first = np.unique(roots, return_index=True)
        order = np.argsort(first)
        remap = {int(roots[first[o]]): cid for cid, o in enumerate(order)}
        labels[core_idx] = [remap[int(r)] for r in roots]

        other = np.flatnonzero(~core)
        if other.size:
            dist, nearest = _tree(cc).query(coords[other], k=1, distance_upper_bound=eps)
            hit = dist <= eps
            labels[other[hit]] = labels[core_idx[nearest[hit]]]

    n_clusters = int(labels.max()) + 1 if n else 0
    clusters = []
    for cid in range(n_clusters):
        members_ = pts[labels == cid]
        centroid = OrientationPoint(float(members_[:, 0].mean()), circular_mean_deg(members_[:, 1]))
        clusters.append(Cluster(members_, centroid))
    return Clustering(pts, labels, core, clusters)


def localize_dbscan_detail(itd: ItdSignal, params: DbscanParams) -> tuple[LocalizationResult, Clustering]:
    """Run mapping and clustering; also return the clustering for export."""
    points = map_to_orientation(itd, params)
    clustering = dbscan(points, params)
    if not clustering.clusters:
        return LocalizationResult([]), clustering
    top = max(c.size for c in clustering.clusters)
    estimates = []
    for c in clustering.clusters:
        conf = 100.0 * c.size / top
        if conf >= params.confidence_threshold_pct:
            estimates.append(OrientationEstimate(c.centroid.theta_deg, c.centroid.phi_deg, c.size, conf))
    return LocalizationResult(estimates), clustering


def localize_dbscan(itd: ItdSignal, params: DbscanParams | None = None) -> LocalizationResult:
    return localize_dbscan_detail(itd, params or DbscanParams())[0]
