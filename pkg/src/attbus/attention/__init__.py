from .channels import FeatureChannels, ORIENTATIONS, compute_channels, gabor_energy
from .foa import (
    AttentionState,
    apply_feedback,
    extract_region,
    map_to_source,
    select_foa,
    source_to_map,
)
from .fourier import fft2d
from .itti import IttiConfig, itti_saliency, local_maxima, normalize_map, rescale01
from .pyramid import build_pyramid, center_surround, depth_limit, scale_pairs
from .spectral import spectral_residual

__all__ = [
    "AttentionState",
    "FeatureChannels",
    "IttiConfig",
    "ORIENTATIONS",
    "apply_feedback",
    "build_pyramid",
    "center_surround",
    "compute_channels",
    "depth_limit",
    "extract_region",
    "fft2d",
    "gabor_energy",
    "itti_saliency",
    "local_maxima",
    "map_to_source",
    "normalize_map",
    "rescale01",
    "scale_pairs",
    "select_foa",
    "source_to_map",
    "spectral_residual",
]
