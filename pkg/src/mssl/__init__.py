"""Multi-source localization from the ITD signal of a self-rotating two-microphone array."""

from .core_model import (
    ArrayConfig,
    ItdSample,
    ItdSignal,
    LocalizationResult,
    OrientationEstimate,
    SineFit,
    SourceSpec,
    angular_distance,
    itd_model,
    solve_two_point,
    theta_from_amplitude,
)
from .dbscan_mssl import DbscanParams, localize_dbscan
from .ransac_mssl import RansacParams, localize_ransac
from .scene_sim import Scene, SimParams, random_scene, synthesize_itd

__version__ = "0.1.0"
