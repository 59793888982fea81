"""Deterministic synthetic grayscale "medical" images with ground-truth boxes.

Four conditions are generated: lesion/healthy crossed with high/low quality.
Lesion images carry bright soft elliptical blobs whose count and size scale
with the severity grade; low-quality images pass through a degradation stack
(blur, occlusion bar, illumination shift, contrast compression). An oracle
detector stands in for a pretrained lesion detector by reporting the known
boxes with configurable miss rate, corner jitter, and confidence floor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolationError
from .seeding import STREAM_DEGRADE, STREAM_DETECT, STREAM_IMAGE, derive_seed, rng_for

NUM_GRADES = 3
CONDITIONS = (("lesion", "high"), ("lesion", "low"), ("healthy", "high"), ("healthy", "low"))


@dataclass(frozen=True)
class Box:
    """Axis-aligned pixel box with exclusive lower-right corner semantics."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if self.x1 >= self.x2 or self.y1 >= self.y2:
            raise ContractViolationError(f"degenerate box {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)

    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def inside(self, height: int, width: int) -> bool:
        return 0 <= self.x1 and 0 <= self.y1 and self.x2 <= width and self.y2 <= height


@dataclass
class SynthImage:
    pixels: np.ndarray  # (H, W) float64 in [0, 1]
    quality: str  # "high" | "low"
    disease: str  # "lesion" | "healthy"
    grade: int
    gt_boxes: list[Box]
    seed: int


@dataclass(frozen=True)
class Detection:
    box: Box
    confidence: float


@dataclass(frozen=True)
class DatasetSpec:
    images_per_condition: int = 400
    image_size: int = 128
    num_grades: int = NUM_GRADES
    seed: int = 7


# -- degradations ------------------------------------------------------------


def gaussian_blur(pixels: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge replication."""
    radius = max(1, int(np.ceil(3.0 * sigma)))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(pixels, ((radius, radius), (0, 0)), mode="edge")
    rows = sum(kernel[i] * padded[i : i + pixels.shape[0], :] for i in range(kernel.size))
    padded = np.pad(rows, ((0, 0), (radius, radius)), mode="edge")
    return sum(kernel[i] * padded[:, i : i + pixels.shape[1]] for i in range(kernel.size))


def occlusion_bar(pixels: np.ndarray, area_fraction: float, horizontal: bool,
                  position: float, intensity: float) -> np.ndarray:
    """Overwrite a full-width/height opaque bar covering the given area fraction."""
    out = pixels.copy()
    h, w = pixels.shape
    if horizontal:
        thickness = max(1, int(round(area_fraction * h)))
        y0 = int(round(position * (h - thickness)))
        out[y0 : y0 + thickness, :] = intensity
    else:
        thickness = max(1, int(round(area_fraction * w)))
        x0 = int(round(position * (w - thickness)))
        out[:, x0 : x0 + thickness] = intensity
    return out


def occlusion_spots(pixels: np.ndarray, area_fraction: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Opaque bright discs (reflection-like artifacts) covering the area fraction.

    These deliberately resemble lesions so that image quality genuinely
    confounds disease signal.
    """
    out = pixels.copy()
    h, w = pixels.shape
    target = area_fraction * h * w
    ys, xs = np.mgrid[0:h, 0:w]
    covered = 0.0
    while covered < target:
        radius = float(rng.uniform(3.0, 9.0))
        cx = rng.uniform(radius, w - radius)
        cy = rng.uniform(radius, h - radius)
        intensity = float(rng.uniform(0.8, 1.0))
        mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius**2
        out[mask] = intensity
        covered += np.pi * radius * radius
    return out


def illumination_shift(pixels: np.ndarray, delta: float) -> np.ndarray:
    return np.clip(pixels + delta, 0.0, 1.0)


def contrast_compress(pixels: np.ndarray, factor: float) -> np.ndarray:
    """Pull values toward mid-gray: 0.5 + factor * (p - 0.5)."""
    return 0.5 + factor * (pixels - 0.5)


def degrade(pixels: np.ndarray, seed: int) -> np.ndarray:
    """Apply 1-3 randomly chosen degradations in canonical order.

    The occlusion slot draws either a full-width opaque bar or a cluster of
    bright lesion-like artifact spots; both cover 5-15% of the image.
    """
    rng = rng_for(STREAM_DEGRADE, seed)
    n_ops = int(rng.integers(1, 4))
    chosen = sorted(rng.choice(4, size=n_ops, replace=False).tolist())
    out = pixels
    for op in chosen:
        if op == 0:
            out = gaussian_blur(out, sigma=float(rng.uniform(1.0, 2.5)))
        elif op == 1:
            area = float(rng.uniform(0.05, 0.15))
            if rng.integers(0, 2):
                out = occlusion_spots(out, area, rng)
            else:
                out = occlusion_bar(
                    out,
                    area_fraction=area,
                    horizontal=bool(rng.integers(0, 2)),
                    position=float(rng.random()),
                    intensity=float(
                        rng.choice([rng.uniform(0.0, 0.15), rng.uniform(0.85, 1.0)])
                    ),
                )
        elif op == 2:
            sign = 1.0 if rng.integers(0, 2) else -1.0
            out = illumination_shift(out, delta=sign * float(rng.uniform(0.1, 0.2)))
        else:
            out = contrast_compress(out, factor=float(rng.uniform(0.4, 0.8)))
    return np.clip(out, 0.0, 1.0)


# -- image synthesis ----------------------------------------------------------


def _background(size: int, rng: np.random.Generator) -> np.ndarray:
    base = rng.uniform(0.38, 0.46)
    ys, xs = np.mgrid[0:size, 0:size] / size
    field = np.full((size, size), base)
    for _ in range(5):
        freq = rng.uniform(0.5, 3.0)
        angle = rng.uniform(0, np.pi)
        phase = rng.uniform(0, 2 * np.pi)
        amp = 0.04 * rng.uniform(0.5, 1.0)
        field += amp * np.cos(2 * np.pi * freq * (np.cos(angle) * xs + np.sin(angle) * ys) + phase)
    for _ in range(int(rng.integers(3, 6))):
        field = _dark_streak(field, rng)
    field += rng.normal(0.0, 0.015, size=(size, size))
    return np.clip(field, 0.02, 0.98)


def _dark_streak(field: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Darken a thin vessel-like segment across the image."""
    size = field.shape[0]
    p0 = rng.uniform(0, size, size=2)
    p1 = rng.uniform(0, size, size=2)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    d = p1 - p0
    length_sq = max(float(d @ d), 1e-9)
    t = np.clip(((xs - p0[0]) * d[0] + (ys - p0[1]) * d[1]) / length_sq, 0.0, 1.0)
    dist_sq = (xs - (p0[0] + t * d[0])) ** 2 + (ys - (p0[1] + t * d[1])) ** 2
    width = rng.uniform(1.0, 2.0)
    depth = rng.uniform(0.05, 0.09)
    return field - depth * np.exp(-dist_sq / (2.0 * width**2))


def _blob_spec(grade: int) -> tuple[int, float, float]:
    """Blob count and semi-axis range per severity grade."""
    if grade == 1:
        return 2, 5.0, 7.0
    return 5, 8.0, 12.0


def generate_image(disease: str, quality: str, grade: int, image_size: int,
                   seed: int) -> SynthImage:
    """Render one synthetic image; bitwise deterministic in (arguments, seed)."""
    if image_size < 64:
        raise ContractViolationError("image_size must be >= 64")
    if disease not in ("lesion", "healthy") or quality not in ("high", "low"):
        raise ContractViolationError(f"unknown condition ({disease}, {quality})")
    if not 0 <= grade < NUM_GRADES:
        raise ContractViolationError(f"grade {grade} outside [0, {NUM_GRADES})")
    if disease == "healthy" and grade != 0:
        raise ContractViolationError("healthy images must carry grade 0")
    if disease == "lesion" and grade == 0:
        raise ContractViolationError("lesion images must carry grade >= 1")

    rng = rng_for(STREAM_IMAGE, seed)
    pixels = _background(image_size, rng)
    boxes: list[Box] = []
    if disease == "lesion":
        count, r_lo, r_hi = _blob_spec(grade)
        ys, xs = np.mgrid[0:image_size, 0:image_size].astype(np.float64)
        for _ in range(count):
            a = rng.uniform(r_lo, r_hi)
            b = a * rng.uniform(0.8, 1.0)
            theta = rng.uniform(0, np.pi)
            margin = int(np.ceil(max(a, b))) + 2
            cx = rng.uniform(margin, image_size - margin)
            cy = rng.uniform(margin, image_size - margin)
            bump = rng.uniform(0.4, 0.55)
            cos_t, sin_t = np.cos(theta), np.sin(theta)
            u = (xs - cx) * cos_t + (ys - cy) * sin_t
            v = -(xs - cx) * sin_t + (ys - cy) * cos_t
            r_sq = (u / a) ** 2 + (v / b) ** 2
            profile = np.clip(1.0 - r_sq, 0.0, 1.0) ** 0.5
            pixels = pixels + bump * profile
            # box the bright core of the soft blob, not its faint skirt
            half_w = 0.85 * np.sqrt((a * cos_t) ** 2 + (b * sin_t) ** 2)
            half_h = 0.85 * np.sqrt((a * sin_t) ** 2 + (b * cos_t) ** 2)
            boxes.append(
                Box(
                    x1=max(0, int(np.floor(cx - half_w))),
                    y1=max(0, int(np.floor(cy - half_h))),
                    x2=min(image_size, int(np.ceil(cx + half_w))),
                    y2=min(image_size, int(np.ceil(cy + half_h))),
                )
            )
        pixels = np.clip(pixels, 0.0, 1.0)
    if quality == "low":
        pixels = degrade(pixels, seed=derive_seed(seed, STREAM_DEGRADE))
    return SynthImage(pixels=pixels, quality=quality, disease=disease, grade=grade,
                      gt_boxes=boxes, seed=seed)


def oracle_detect(image: SynthImage, miss_rate: float = 0.0, box_jitter: float = 0.0,
                  conf: float = 0.5, seed: int | None = None) -> list[Detection]:
    """Report ground-truth boxes as a noisy stand-in for a trained detector.

    Each box survives with probability 1 - miss_rate, its corners jittered
    uniformly within +/- box_jitter pixels; confidences are drawn from
    [conf, 1] and only detections strictly above conf are returned.
    """
    if not 0.0 <= miss_rate < 1.0:
        raise ContractViolationError("miss_rate must lie in [0, 1)")
    if box_jitter < 0:
        raise ContractViolationError("box_jitter must be >= 0")
    rng = rng_for(STREAM_DETECT, derive_seed(image.seed, STREAM_DETECT) if seed is None else seed)
    height, width = image.pixels.shape
    detections: list[Detection] = []
    for box in image.gt_boxes:
        missed = rng.random() < miss_rate
        jitter = rng.uniform(-box_jitter, box_jitter, size=4)
        confidence = float(rng.uniform(conf, 1.0))
        if missed:
            continue
        x1 = int(np.clip(round(box.x1 + jitter[0]), 0, width - 1))
        y1 = int(np.clip(round(box.y1 + jitter[1]), 0, height - 1))
        x2 = int(np.clip(round(box.x2 + jitter[2]), x1 + 1, width))
        y2 = int(np.clip(round(box.y2 + jitter[3]), y1 + 1, height))
        if confidence > conf:
            detections.append(Detection(box=Box(x1, y1, x2, y2), confidence=confidence))
    return detections


# -- dataset assembly and disk format -----------------------------------------


def make_dataset(spec: DatasetSpec) -> list[SynthImage]:
    """Generate the full four-condition dataset in a fixed deterministic order."""
    images: list[SynthImage] = []
    for cond_idx, (disease, quality) in enumerate(CONDITIONS):
        for i in range(spec.images_per_condition):
            grade = 0 if disease == "healthy" else 1 + (i % (spec.num_grades - 1))
            seed = derive_seed(spec.seed, STREAM_IMAGE, cond_idx, i)
            images.append(generate_image(disease, quality, grade, spec.image_size, seed))
    return images


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    quantized = np.clip(np.round(pixels * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{quantized.shape[1]} {quantized.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + quantized.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5" or len(parts) != 4:
        raise ContractViolationError(f"{path}: not a binary PGM file")
    width, height = (int(v) for v in parts[1].split())
    data = np.frombuffer(parts[3], dtype=np.uint8, count=height * width)
    return data.reshape(height, width).astype(np.float64) / 255.0


def dump_dataset(images: list[SynthImage], out_dir: str | Path) -> Path:
    """Write images as 8-bit PGM plus a line-delimited JSON manifest."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    lines = []
    for idx, img in enumerate(images):
        rel = f"images/{img.disease}_{img.quality}_{idx:05d}.pgm"
        write_pgm(out / rel, img.pixels)
        lines.append(json.dumps({
            "path": rel,
            "disease": img.disease,
            "quality": img.quality,
            "grade": img.grade,
            "boxes": [b.as_tuple() for b in img.gt_boxes],
            "seed": img.seed,
        }))
    manifest = out / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def load_dataset(in_dir: str | Path) -> list[SynthImage]:
    """Read a dumped dataset back; pixels are the 8-bit quantized values."""
    root = Path(in_dir)
    images = []
    for line in (root / "manifest.jsonl").read_text().splitlines():
        record = json.loads(line)
        images.append(SynthImage(
            pixels=read_pgm(root / record["path"]),
            quality=record["quality"],
            disease=record["disease"],
            grade=record["grade"],
            gt_boxes=[Box(*b) for b in record["boxes"]],
            seed=record["seed"],
        ))
    return images
