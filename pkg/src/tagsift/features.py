"""Region and whole-image feature extraction.

Region vectors concatenate a color autocorrelogram, color moments, shape
statistics, and the region centroid.  Global vectors concatenate a coarse
RGB histogram with an edge direction histogram.  All vectors are float64
in memory and float32 on disk.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .segmenter import Region

CORR_DISTANCES = (1, 3, 5, 7)
CORR_COLORS = 8
CORR_DIM = CORR_COLORS * len(CORR_DISTANCES)
MOMENT_DIM = 9
SHAPE_DIM = 3
POSITION_DIM = 2
REGION_DIM = CORR_DIM + MOMENT_DIM + SHAPE_DIM + POSITION_DIM

HIST_BINS_PER_CHANNEL = 4
HIST_DIM = HIST_BINS_PER_CHANNEL**3
EDGE_DIRECTION_BINS = 18
EDGE_DIM = EDGE_DIRECTION_BINS + 1
GLOBAL_DIM = HIST_DIM + EDGE_DIM

ASPECT_CAP = 8.0


@dataclass(frozen=True)
class FeatureConfig:
    edge_threshold: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.edge_threshold < 1.0:
            raise ValueError("edge_threshold must be in [0, 1)")


@dataclass(frozen=True)
class RegionFeature:
    region_id: str
    vector: np.ndarray


@dataclass(frozen=True)
class GlobalFeature:
    image_id: str
    vector: np.ndarray


def _as_rgb(image: np.ndarray) -> np.ndarray:
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected HxWx3 image, got shape {image.shape}")
    return np.asarray(image, dtype=np.uint8)


def quantize_colors(pixels: np.ndarray) -> np.ndarray:
    """Map RGB pixels to one of 8 colors: one bit per channel at mid-range."""
    bits = (pixels >= 128).astype(np.int64)
    return bits[..., 0] * 4 + bits[..., 1] * 2 + bits[..., 2]


def _ring_offsets(d: int) -> list[tuple[int, int]]:
    """Half of the Chebyshev ring at radius d (one point per unordered pair)."""
    offsets = [(d, dx) for dx in range(-d, d + 1)]
    offsets += [(dy, d) for dy in range(-d + 1, d)]
    return offsets


def autocorrelogram(patch: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Same-color pixel pair rates at fixed Chebyshev distances.

    Counts pairs where both endpoints fall inside the mask, normalized to
    sum to 1 over colors at each distance.  Distances with no in-mask
    pairs contribute an all-zero block.
    """
    colors = quantize_colors(patch)
    mask = mask.astype(bool)
    h, w = colors.shape
    out = np.zeros(CORR_DIM, dtype=np.float64)
    for di, d in enumerate(CORR_DISTANCES):
        counts = np.zeros(CORR_COLORS, dtype=np.float64)
        for dy, dx in _ring_offsets(d):
            ys0 = slice(max(0, -dy), min(h, h - dy))
            xs0 = slice(max(0, -dx), min(w, w - dx))
            ys1 = slice(max(0, dy), min(h, h + dy))
            xs1 = slice(max(0, dx), min(w, w + dx))
            a = colors[ys0, xs0]
            b = colors[ys1, xs1]
            both = mask[ys0, xs0] & mask[ys1, xs1]
            same = both & (a == b)
            if same.any():
                counts += np.bincount(a[same], minlength=CORR_COLORS)
        total = counts.sum()
        if total > 0:
            out[di * CORR_COLORS : (di + 1) * CORR_COLORS] = counts / total
    return out


def color_moments(patch: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-channel mean, spread, and signed-cube-root skew on [0, 1] values."""
    mask = mask.astype(bool)
    values = patch[mask].astype(np.float64) / 255.0
    if values.size == 0:
        raise ValueError("region mask selects no pixels")
    means = values.mean(axis=0)
    centered = values - means
    stds = np.sqrt((centered**2).mean(axis=0))
    skews = np.cbrt((centered**3).mean(axis=0))
    return np.concatenate([means, stds, skews])


def region_features(
    image: np.ndarray, region: Region, config: FeatureConfig | None = None
) -> RegionFeature:
    del config
    rgb = _as_rgb(image)
    x0, y0, x1, y1 = region.bbox
    patch = rgb[y0:y1, x0:x1]
    if patch.size == 0:
        raise ValueError(f"region {region.region_id} has an empty bounding box")
    mask = region.mask_array()
    if mask.shape != patch.shape[:2]:
        raise ValueError(
            f"region {region.region_id} mask shape {mask.shape} does not match "
            f"bbox extent {patch.shape[:2]}"
        )
    if not mask.any():
        raise ValueError(f"region {region.region_id} mask selects no pixels")
    aspect = min(region.width / region.height, ASPECT_CAP) / ASPECT_CAP
    extent = float(mask.mean())
    shape = np.array([region.area_fraction, aspect, extent], dtype=np.float64)
    position = np.array(region.centroid, dtype=np.float64)
    vector = np.concatenate(
        [autocorrelogram(patch, mask), color_moments(patch, mask), shape, position]
    )
    return RegionFeature(region_id=region.region_id, vector=vector)


def color_histogram(rgb: np.ndarray) -> np.ndarray:
    """L1-normalized 4x4x4 RGB histogram (2 high bits per channel)."""
    coarse = (rgb >> 6).astype(np.int64)
    index = coarse[..., 0] * 16 + coarse[..., 1] * 4 + coarse[..., 2]
    counts = np.bincount(index.ravel(), minlength=HIST_DIM).astype(np.float64)
    return counts / counts.sum()


def edge_direction_histogram(rgb: np.ndarray, threshold: float) -> np.ndarray:
    """Distribution of Sobel gradient directions over interior pixels.

    Directions are folded to [0, 180) degrees and spread across 18 bins;
    pixels whose normalized gradient magnitude falls below the threshold
    count toward a final no-edge bin.
    """
    lum = (
        0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    ) / 255.0
    h, w = lum.shape
    out = np.zeros(EDGE_DIM, dtype=np.float64)
    if h < 3 or w < 3:
        out[-1] = 1.0
        return out
    # Sobel responses on the interior, assembled from shifted views.
    tl, tc, tr = lum[:-2, :-2], lum[:-2, 1:-1], lum[:-2, 2:]
    ml, mr = lum[1:-1, :-2], lum[1:-1, 2:]
    bl, bc, br = lum[2:, :-2], lum[2:, 1:-1], lum[2:, 2:]
    gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl)
    gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr)
    magnitude = np.hypot(gx, gy) / 4.0
    strong = magnitude >= threshold
    out[-1] = float(np.count_nonzero(~strong))
    if strong.any():
        angles = np.degrees(np.arctan2(gy[strong], gx[strong])) % 180.0
        bins = np.minimum(
            (angles / (180.0 / EDGE_DIRECTION_BINS)).astype(np.int64),
            EDGE_DIRECTION_BINS - 1,
        )
        out[:EDGE_DIRECTION_BINS] = np.bincount(
            bins, minlength=EDGE_DIRECTION_BINS
        )
    return out / out.sum()


def global_features(
    image: np.ndarray, image_id: str, config: FeatureConfig | None = None
) -> GlobalFeature:
    cfg = config or FeatureConfig()
    rgb = _as_rgb(image)
    vector = np.concatenate(
        [color_histogram(rgb), edge_direction_histogram(rgb, cfg.edge_threshold)]
    )
    return GlobalFeature(image_id=image_id, vector=vector)


_STORE_MAGIC = "tagsift-features"


def save_feature_store(path: Path | str, ids: list[str], matrix: np.ndarray) -> None:
    """Write a float32 feature matrix with an id sidecar next to it."""
    path = Path(path)
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise ValueError("feature matrix must be 2-dimensional")
    if len(ids) != matrix.shape[0]:
        raise ValueError(
            f"id count {len(ids)} does not match row count {matrix.shape[0]}"
        )
    header = f"{_STORE_MAGIC} dim={matrix.shape[1]} count={matrix.shape[0]}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(matrix.astype("<f4").tobytes())
    with open(path.with_suffix(path.suffix + ".ids"), "w", encoding="utf-8") as fh:
        for row_id in ids:
            fh.write(row_id + "\n")


def load_feature_store(path: Path | str) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        parts = header.split()
        if len(parts) != 3 or parts[0] != _STORE_MAGIC:
            raise ValueError(f"{path} is not a feature store")
        dim = int(parts[1].removeprefix("dim="))
        count = int(parts[2].removeprefix("count="))
        raw = fh.read()
    expected = dim * count * 4
    if len(raw) != expected:
        raise ValueError(
            f"{path} payload is {len(raw)} bytes, expected {expected}"
        )
    matrix = np.frombuffer(raw, dtype="<f4").reshape(count, dim).astype(np.float64)
    ids_path = path.with_suffix(path.suffix + ".ids")
    with open(ids_path, "r", encoding="utf-8") as fh:
        ids = [line.rstrip("\n") for line in fh if line.strip()]
    if len(ids) != count:
        raise ValueError(
            f"{ids_path} lists {len(ids)} ids, feature store holds {count} rows"
        )
    return ids, matrix
