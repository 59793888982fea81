"""Patch construction: level partition, box expansion, random crops, augmentation.

The dataset splits into four level subsets (lesion/healthy crossed with
high/low quality). Lesion-side patches come from detector boxes expanded to a
fixed square window; healthy-side patches come from uniformly random crops.
Each anchor patch can be paired with a stochastically augmented twin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ContractViolationError
from .seeding import STREAM_AUGMENT, STREAM_CROP, STREAM_DETECT, derive_seed, rng_for
from .synthgen import Box, SynthImage, oracle_detect


class LevelTag(str, Enum):
    LESION_HIGH = "lesion_high"
    LESION_LOW = "lesion_low"
    HEALTHY_HIGH = "healthy_high"
    HEALTHY_LOW = "healthy_low"

    @property
    def is_lesion(self) -> bool:
        return self in (LevelTag.LESION_HIGH, LevelTag.LESION_LOW)

    @property
    def is_low_quality(self) -> bool:
        return self in (LevelTag.LESION_LOW, LevelTag.HEALTHY_LOW)


_CONDITION_TO_TAG = {
    ("lesion", "high"): LevelTag.LESION_HIGH,
    ("lesion", "low"): LevelTag.LESION_LOW,
    ("healthy", "high"): LevelTag.HEALTHY_HIGH,
    ("healthy", "low"): LevelTag.HEALTHY_LOW,
}

# Stable small integers for seed derivation (str hashes are randomized).
_TAG_INDEX = {tag: i for i, tag in enumerate(LevelTag)}


@dataclass
class Patch:
    pixels: np.ndarray  # (P, P) float64
    level: LevelTag
    source_image_id: str
    window: Box
    grade: int


@dataclass(frozen=True)
class DetectorParams:
    """Noise model for the oracle detector standing in for a trained one."""

    miss_rate: float = 0.1
    box_jitter: float = 2.0
    conf: float = 0.5
    seed: int = 0


@dataclass
class BuildReport:
    """Bookkeeping from level-set construction."""

    skipped_no_detection: dict[LevelTag, int] = field(default_factory=dict)
    patch_counts: dict[LevelTag, int] = field(default_factory=dict)


def partition(dataset: list[SynthImage]) -> dict[LevelTag, list[SynthImage]]:
    """Split images into the four disjoint level subsets."""
    subsets: dict[LevelTag, list[SynthImage]] = {tag: [] for tag in LevelTag}
    for image in dataset:
        key = (image.disease, image.quality)
        if key not in _CONDITION_TO_TAG:
            raise ContractViolationError(f"image has invalid labels {key}")
        subsets[_CONDITION_TO_TAG[key]].append(image)
    return subsets


def expand_box(box: Box, image_size: int, patch_side: int) -> Box:
    """Grow a detection box to a patch_side square centred on it.

    The window is translated, never shrunk, to stay inside the image.
    """
    if patch_side > image_size:
        raise ContractViolationError("patch_side exceeds image size")
    if not box.inside(image_size, image_size):
        raise ContractViolationError(f"box {box.as_tuple()} outside image")
    cx, cy = box.center()
    half = patch_side // 2
    x1 = int(np.floor(cx + 0.5)) - half
    y1 = int(np.floor(cy + 0.5)) - half
    x1 = min(max(x1, 0), image_size - patch_side)
    y1 = min(max(y1, 0), image_size - patch_side)
    return Box(x1, y1, x1 + patch_side, y1 + patch_side)


def rand_crop(image: SynthImage, patch_side: int, seed: int) -> Box:
    """Uniformly random patch_side window; deterministic per seed."""
    height, width = image.pixels.shape
    if patch_side > min(height, width):
        raise ContractViolationError("patch_side exceeds image size")
    rng = rng_for(STREAM_CROP, seed)
    x1 = int(rng.integers(0, width - patch_side + 1))
    y1 = int(rng.integers(0, height - patch_side + 1))
    return Box(x1, y1, x1 + patch_side, y1 + patch_side)


def _extract(image: SynthImage, window: Box) -> np.ndarray:
    return image.pixels[window.y1 : window.y2, window.x1 : window.x2].copy()


def build_level_sets(
    subsets: dict[LevelTag, list[SynthImage]],
    detector: DetectorParams,
    patch_side: int,
    patches_per_healthy_image: int,
    seed: int,
) -> tuple[dict[LevelTag, list[Patch]], BuildReport]:
    """Materialize the four level sample sets.

    Lesion images contribute one patch per surviving detection; lesion images
    with zero detections are skipped and counted. Healthy images contribute a
    fixed number of random crops.
    """
    level_sets: dict[LevelTag, list[Patch]] = {tag: [] for tag in LevelTag}
    report = BuildReport(skipped_no_detection={tag: 0 for tag in LevelTag})
    for tag, images in subsets.items():
        for idx, image in enumerate(images):
            image_id = f"{tag.value}:{idx:05d}"
            size = image.pixels.shape[0]
            if tag.is_lesion:
                detections = oracle_detect(
                    image,
                    miss_rate=detector.miss_rate,
                    box_jitter=detector.box_jitter,
                    conf=detector.conf,
                    seed=derive_seed(seed, STREAM_DETECT, detector.seed, _TAG_INDEX[tag], idx),
                )
                if not detections:
                    report.skipped_no_detection[tag] += 1
                    continue
                for det in detections:
                    window = expand_box(det.box, size, patch_side)
                    level_sets[tag].append(Patch(_extract(image, window), tag, image_id,
                                                 window, image.grade))
            else:
                for crop_idx in range(patches_per_healthy_image):
                    window = rand_crop(
                        image, patch_side,
                        seed=derive_seed(seed, STREAM_CROP, _TAG_INDEX[tag], idx, crop_idx),
                    )
                    level_sets[tag].append(Patch(_extract(image, window), tag, image_id,
                                                 window, image.grade))
    report.patch_counts = {tag: len(patches) for tag, patches in level_sets.items()}
    return level_sets, report


# -- augmentation -------------------------------------------------------------


@dataclass(frozen=True)
class AugmentParams:
    """Concrete augmentation choices; the identity is all-defaults."""

    hflip: bool = False
    quarter_turns: int = 0
    brightness: float = 0.0
    crop_side: int = 0  # 0 means full side (no crop)
    crop_x: int = 0
    crop_y: int = 0


def draw_augment_params(patch_side: int, seed: int) -> AugmentParams:
    return draw_augment_params_from(rng_for(STREAM_AUGMENT, seed), patch_side)


def draw_augment_params_from(rng: np.random.Generator, patch_side: int) -> AugmentParams:
    hflip = bool(rng.integers(0, 2))
    quarter_turns = int(rng.integers(0, 4))
    brightness = float(rng.uniform(-0.1, 0.1))
    area = float(rng.uniform(0.8, 1.0))
    crop_side = max(1, min(patch_side, int(round(patch_side * np.sqrt(area)))))
    crop_x = int(rng.integers(0, patch_side - crop_side + 1))
    crop_y = int(rng.integers(0, patch_side - crop_side + 1))
    return AugmentParams(hflip, quarter_turns, brightness, crop_side, crop_x, crop_y)


def _resize_bilinear(pixels: np.ndarray, out_side: int) -> np.ndarray:
    src = pixels.shape[0]
    if src == out_side:
        return pixels.copy()
    scale = src / out_side
    coords = (np.arange(out_side) + 0.5) * scale - 0.5
    coords = np.clip(coords, 0.0, src - 1.0)
    lo = np.floor(coords).astype(int)
    hi = np.minimum(lo + 1, src - 1)
    frac = coords - lo
    rows = pixels[lo][:, :] * (1 - frac)[:, None] + pixels[hi][:, :] * frac[:, None]
    out = rows[:, lo] * (1 - frac)[None, :] + rows[:, hi] * frac[None, :]
    return out


def apply_augment(patch: Patch, params: AugmentParams) -> Patch:
    """Apply explicit augmentation choices; level and grade are preserved."""
    side = patch.pixels.shape[0]
    out = patch.pixels
    crop_side = params.crop_side or side
    if crop_side != side or params.crop_x or params.crop_y:
        out = out[params.crop_y : params.crop_y + crop_side,
                  params.crop_x : params.crop_x + crop_side]
        out = _resize_bilinear(out, side)
    else:
        out = out.copy()
    if params.hflip:
        out = np.fliplr(out)
    if params.quarter_turns:
        out = np.rot90(out, k=params.quarter_turns)
    if params.brightness:
        out = np.clip(out + params.brightness, 0.0, 1.0)
    return Patch(np.ascontiguousarray(out), patch.level, patch.source_image_id,
                 patch.window, patch.grade)


def augment(patch: Patch, seed: int) -> Patch:
    """Random flip/rotate/brightness/crop-rescale augmentation, seeded."""
    return apply_augment(patch, draw_augment_params(patch.pixels.shape[0], seed))


# -- patch cache on disk --------------------------------------------------------


def dump_patches(level_sets: dict[LevelTag, list[Patch]], out_dir) -> "Path":
    """Write patches as 8-bit PGM plus a JSONL manifest with level and window."""
    import json
    from pathlib import Path

    from .synthgen import write_pgm

    out = Path(out_dir)
    (out / "patches").mkdir(parents=True, exist_ok=True)
    lines = []
    counter = 0
    for tag in LevelTag:
        for patch in level_sets.get(tag, []):
            rel = f"patches/{tag.value}_{counter:06d}.pgm"
            write_pgm(out / rel, patch.pixels)
            lines.append(json.dumps({
                "path": rel,
                "level": tag.value,
                "source_image_id": patch.source_image_id,
                "window": patch.window.as_tuple(),
                "grade": patch.grade,
            }))
            counter += 1
    manifest = out / "patches_manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def load_patches(in_dir) -> dict[LevelTag, list[Patch]]:
    """Read a dumped patch cache; pixels are the 8-bit quantized values."""
    import json
    from pathlib import Path

    from .synthgen import read_pgm

    root = Path(in_dir)
    level_sets: dict[LevelTag, list[Patch]] = {tag: [] for tag in LevelTag}
    for line in (root / "patches_manifest.jsonl").read_text().splitlines():
        record = json.loads(line)
        tag = LevelTag(record["level"])
        level_sets[tag].append(Patch(
            pixels=read_pgm(root / record["path"]),
            level=tag,
            source_image_id=record["source_image_id"],
            window=Box(*record["window"]),
            grade=record["grade"],
        ))
    return level_sets
