"""Synthetic CSI fingerprinting laboratory.

Simulates multi-link OFDM amplitude measurements perturbed by targets on a
grid, builds time-frequency image datasets, trains a from-scratch CNN for
multi-label grid localization, and scores it against a template-matching
baseline. The experiments module drives config-defined sweeps with CSV and
figure output.
"""

from .chansim import ChannelParams, CsiBatch
from .config import ConfigInvalid, ExperimentConfig, validate_config
from .geometry import Scenario, build_scenario, grid_center, point_to_segment_distance
from .mltf import (Dataset, LocationVector, MltfImage, amplitude_dynamic,
                   build_images, load_dataset, save_dataset)
from .pipeline import (DatasetSpec, TrainConfig, TrainResult, evaluate,
                       localize, nearest_fingerprint_baseline,
                       synthesize_dataset, synthesize_eval_images, train)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "ConfigInvalid", "CsiBatch", "Dataset", "DatasetSpec",
    "ExperimentConfig", "LocationVector", "MltfImage", "Scenario",
    "TrainConfig", "TrainResult", "amplitude_dynamic", "build_images",
    "build_scenario", "evaluate", "grid_center", "load_dataset", "localize",
    "nearest_fingerprint_baseline", "point_to_segment_distance",
    "save_dataset", "synthesize_dataset", "synthesize_eval_images", "train",
    "validate_config",
]
