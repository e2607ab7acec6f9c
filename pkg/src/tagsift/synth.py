"""Synthetic corpus generator: a desk-scale stand-in for a crawled photo corpus.

Each image is a label-specific colored patch composited onto one of a small
set of shared background textures. Truth labels reflect the rendered patch;
tags equal the truth label with probability (1 - noise_rate), otherwise a
wrong label is substituted, so initial tag precision lands near 1 - noise_rate.

Texture tones sit well away from the mid-range color quantization boundary
(so region descriptors of a texture are stable) but near coarse-histogram
bin edges, so a per-image tone shift (background_tone_jitter) smears the
whole-image histograms without disturbing region-level structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .corpus import Corpus, ImageRecord, write_manifest

# quantization octant corners, ordered so early labels are maximally separated
_OCTANT_ORDER = (1, 2, 4, 7, 3, 5, 6, 0)
# per-ring channel levels; rings share octants but differ in color moments
_RING_LEVELS = ((42, 212), (96, 160), (74, 188))

_PATTERNS = ("checker", "hstripes", "vstripes", "diag")


@dataclass(frozen=True)
class SyntheticConfig:
    num_labels: int = 4
    dev_per_label: int = 50
    test_per_label: int = 25
    noise_rate: float = 0.0
    num_background_textures: int = 3
    image_size: int = 64
    patch_fraction: float = 0.625  # patch edge relative to image edge
    patch_jitter: int = 6          # max offset (px) of the patch from center
    color_jitter: float = 5.0      # stddev of per-image patch color shift
    pixel_noise: float = 4.0       # stddev of per-pixel background noise
    patch_pixel_noise: float = 2.0
    background_tone_jitter: float = 0.0  # stddev of per-image texture tone shift

    def __post_init__(self):
        if self.num_labels < 1:
            raise ValueError("num_labels must be >= 1")
        if self.background_tone_jitter < 0:
            raise ValueError("background_tone_jitter must be >= 0")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError("noise_rate must be in [0, 1)")
        if self.noise_rate > 0.0 and self.num_labels < 2:
            raise ValueError("tag noise needs at least 2 labels to substitute from")
        if self.num_background_textures < 1:
            raise ValueError("need at least one background texture")
        if self.image_size < 8:
            raise ValueError("image_size must be >= 8")


def label_names(config: SyntheticConfig) -> list[str]:
    return [f"label{i:02d}" for i in range(config.num_labels)]


def label_color(index: int) -> tuple[int, int, int]:
    """Distinct, saturated base color for a label; first 8 land in the 8
    distinct color-quantization octants."""
    ring, slot = divmod(index, len(_OCTANT_ORDER))
    lo, hi = _RING_LEVELS[ring % len(_RING_LEVELS)]
    octant = _OCTANT_ORDER[slot]
    return (
        hi if octant & 4 else lo,
        hi if octant & 2 else lo,
        hi if octant & 1 else lo,
    )


def background_texture(index: int, size: int) -> np.ndarray:
    """Deterministic grayscale two-tone texture, (size, size, 3) uint8."""
    tone_a = 56 + (23 * index) % 32
    tone_b = 158 + (17 * index) % 40
    scale = (2, 4, 8)[index % 3]
    pattern = _PATTERNS[index % len(_PATTERNS)]
    yy, xx = np.mgrid[0:size, 0:size]
    if pattern == "checker":
        sel = ((yy // scale) + (xx // scale)) % 2 == 0
    elif pattern == "hstripes":
        sel = (yy // scale) % 2 == 0
    elif pattern == "vstripes":
        sel = (xx // scale) % 2 == 0
    else:
        sel = ((yy + xx) // scale) % 2 == 0
    gray = np.where(sel, tone_a, tone_b).astype(np.float64)
    return np.repeat(gray[:, :, None], 3, axis=2)


def _render(config: SyntheticConfig, label_idx: int, rng: np.random.Generator) -> np.ndarray:
    size = config.image_size
    texture = background_texture(
        int(rng.integers(config.num_background_textures)), size
    )
    tone_shift = rng.normal(0.0, config.background_tone_jitter)
    img = texture + tone_shift + rng.normal(0.0, config.pixel_noise, texture.shape)

    patch = max(4, round(size * config.patch_fraction))
    patch = min(patch, size)
    base = (size - patch) // 2
    jitter = min(config.patch_jitter, base)
    ox = base + int(rng.integers(-jitter, jitter + 1)) if jitter else base
    oy = base + int(rng.integers(-jitter, jitter + 1)) if jitter else base

    color = np.asarray(label_color(label_idx), dtype=np.float64)
    color = color + rng.normal(0.0, config.color_jitter, 3)
    tile = color[None, None, :] + rng.normal(
        0.0, config.patch_pixel_noise, (patch, patch, 3)
    )
    img[oy : oy + patch, ox : ox + patch, :] = tile
    return np.clip(img, 0, 255).astype(np.uint8)


def generate_synthetic(
    config: SyntheticConfig, seed: int, out_dir: Path | str
) -> Corpus:
    """Render the corpus into out_dir/images, write out_dir/manifest.tsv,
    and return the loaded-equivalent Corpus. Deterministic given seed."""
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    try:
        image_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {image_dir}: {exc}") from exc

    rng = np.random.default_rng(seed)
    labels = label_names(config)
    records: list[ImageRecord] = []

    for split, per_label in (
        ("development", config.dev_per_label),
        ("testing", config.test_per_label),
    ):
        for li, label in enumerate(labels):
            for j in range(per_label):
                image_id = f"img-{split[:3]}-{label}-{j:04d}"
                rel_path = f"images/{image_id}.png"
                pixels = _render(config, li, rng)
                Image.fromarray(pixels).save(out_dir / rel_path)

                truth = frozenset({label})
                if split == "development" and rng.random() < config.noise_rate:
                    others = [l for l in labels if l != label]
                    tags = frozenset({others[int(rng.integers(len(others)))]})
                else:
                    tags = truth
                records.append(ImageRecord(image_id, rel_path, split, tags, truth))

    corpus = Corpus(records, root=out_dir)
    write_manifest(corpus, out_dir / "manifest.tsv")
    return corpus


def tags_match_truth_fraction(corpus: Corpus, split: str = "development") -> float:
    """Fraction of split images whose tags equal their truth labels."""
    recs = corpus.split_records(split)
    if not recs:
        raise ValueError(f"no records in split '{split}'")
    hits = sum(1 for r in recs if r.tags == r.truth_labels)
    return hits / len(recs)
