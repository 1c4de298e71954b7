"""Training-pair generation, augmentation, and the synthetic desk-scale dataset."""

from .segmentation import segment_object
from .lut import Lut3D, apply_lut, identity_lut, constant_lut, random_smooth_lut, read_cube, write_cube
from .video import VideoPairSpec, sample_frame_pair
from .masks import coarsen_mask, validate_mask_level
from .augment import AugmentParams, augment_object, sample_augment_params
from .fitting import fit_object_in_mask
from .manifest import ManifestRecord, read_manifest, write_manifest
from .synthetic import SyntheticConfig, generate_synthetic_dataset
from .examples import (
    CompositeExample,
    ViewPairExample,
    build_stage1_example,
    build_stage2_example,
)

__all__ = [
    "segment_object",
    "Lut3D",
    "apply_lut",
    "identity_lut",
    "constant_lut",
    "random_smooth_lut",
    "read_cube",
    "write_cube",
    "VideoPairSpec",
    "sample_frame_pair",
    "coarsen_mask",
    "validate_mask_level",
    "AugmentParams",
    "augment_object",
    "sample_augment_params",
    "fit_object_in_mask",
    "ManifestRecord",
    "read_manifest",
    "write_manifest",
    "SyntheticConfig",
    "generate_synthetic_dataset",
    "CompositeExample",
    "ViewPairExample",
    "build_stage1_example",
    "build_stage2_example",
]
