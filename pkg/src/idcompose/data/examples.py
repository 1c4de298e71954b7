"""Training example assembly for both stages.

Stage 1 consumes multi-view groups and yields segmented view pairs. Stage 2
consumes scene groups and yields compositing tuples by one of two routes:
"video" takes the object from a nearby frame, "image" perturbs the target's
own object with an affine + color augmentation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..buffers import ensure_image, ensure_mask, load_image, load_mask, mask_support
from ..errors import ConfigurationError, DatasetError
from ..seeding import derive_seed
from .augment import AugmentParams, augment_object, sample_augment_params
from .manifest import ManifestRecord
from .masks import coarsen_mask, validate_mask_level
from .segmentation import segment_object
from .video import DEFAULT_WINDOW, VideoPairSpec, sample_frame_pair

ROUTES = ("video", "image")


@dataclass(frozen=True)
class ViewPairExample:
    source_view: np.ndarray  # segmented: zero outside the object
    target_view: np.ndarray

    def __post_init__(self) -> None:
        ensure_image(self.source_view)
        ensure_image(self.target_view)


@dataclass(frozen=True)
class CompositeExample:
    object_image: np.ndarray  # segmented conditioning object
    background: np.ndarray
    mask: np.ndarray  # coarsened placement region
    target: np.ndarray  # unmodified scene the loss reconstructs
    mask_level: int
    source_index: int | None = None
    target_index: int | None = None

    def __post_init__(self) -> None:
        ensure_image(self.object_image)
        ensure_image(self.background)
        ensure_image(self.target)
        ensure_mask(self.mask, like=self.target)
        validate_mask_level(self.mask_level)


def _load_record(root, rec: ManifestRecord) -> tuple[np.ndarray, np.ndarray]:
    root = Path(root)
    image = load_image(root / rec.image_path)
    mask = load_mask(root / rec.mask_path)
    return image, mask


def _check_group(records: list[ManifestRecord]) -> None:
    if not records:
        raise DatasetError("empty record group")
    if len({r.object_id for r in records}) != 1:
        raise DatasetError("record group spans multiple object ids")


def build_stage1_example(records: list[ManifestRecord], root, rng_seed: int,
                         window: int | None = None) -> ViewPairExample:
    """Segmented view pair from one multi-view group.

    window=None admits every distinct ordered pair; an explicit window
    restricts to |a - b| <= window as in temporal sampling.
    """
    _check_group(records)
    n = len(records)
    w = (n - 1) if window is None else window
    seed = derive_seed("stage1-pair", rng_seed, records[0].object_id)
    a, b = sample_frame_pair(VideoPairSpec(frame_count=n, window=max(w, 1), rng_seed=seed))
    image_a, mask_a = _load_record(root, records[a])
    image_b, mask_b = _load_record(root, records[b])
    return ViewPairExample(
        source_view=segment_object(image_a, mask_a),
        target_view=segment_object(image_b, mask_b),
    )


def build_stage2_example(records: list[ManifestRecord], root, level: int,
                         rng_seed: int, route: str = "video",
                         augment_params: AugmentParams | None = None,
                         window: int = DEFAULT_WINDOW) -> CompositeExample:
    """Compositing tuple from one scene group.

    The target frame is never modified; the conditioning object comes from a
    window-limited different frame ("video") or from an augmented copy of the
    target's own object ("image"). The placement mask is the target's fine
    mask coarsened to the requested level.
    """
    if route not in ROUTES:
        raise ConfigurationError(f"route must be one of {ROUTES}, got {route!r}")
    _check_group(records)
    validate_mask_level(level)
    n = len(records)
    oid = records[0].object_id

    if route == "video":
        seed = derive_seed("stage2-pair", rng_seed, oid)
        src, tgt = sample_frame_pair(VideoPairSpec(frame_count=n, window=window, rng_seed=seed))
        obj_image, obj_mask = _load_record(root, records[src])
        target, target_mask = _load_record(root, records[tgt])
        object_image = segment_object(obj_image, obj_mask)
    else:
        pick = derive_seed("stage2-frame", rng_seed, oid) % n
        src = tgt = pick
        target, target_mask = _load_record(root, records[pick])
        segmented = segment_object(target, target_mask)
        params = augment_params
        if params is None:
            params = sample_augment_params(derive_seed("stage2-augment", rng_seed, oid))
        warped, warped_mask = augment_object(segmented, target_mask, params)
        # the color perturbation can lift zeros, so re-segment with the warped mask
        object_image = segment_object(warped, warped_mask)

    mask = coarsen_mask(target_mask, level, rng_seed=derive_seed("stage2-mask", rng_seed, oid))
    example = CompositeExample(
        object_image=object_image,
        background=target,
        mask=mask,
        target=target,
        mask_level=level,
        source_index=records[src].index,
        target_index=records[tgt].index,
    )
    # placement mask must cover the target object's true footprint
    fine = mask_support(target_mask)
    if np.any(fine & ~mask_support(mask)):
        raise DatasetError("coarsened mask does not cover the target object")
    return example
