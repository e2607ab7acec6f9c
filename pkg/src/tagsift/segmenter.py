"""Deterministic image over-segmentation into regions.

The default strategy partitions an image into a G x G grid of rectangles
(last row/column absorb remainder pixels). Strategies are pluggable behind
segment(); any future strategy must keep regions pairwise disjoint, covering,
and must embed the owning image id in region ids as "<image_id>#<suffix>".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SegmenterConfig:
    strategy: str = "grid"
    grid_size: int = 4


@dataclass(frozen=True, eq=False)
class Region:
    """One segment of an image. mask is bbox-aligned; None means the full
    bbox rectangle (the grid strategy's case)."""

    region_id: str
    image_id: str
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive end)
    area_fraction: float
    centroid: tuple[float, float]    # normalized to [0,1]^2
    mask: np.ndarray | None = field(default=None, repr=False)

    @property
    def width(self) -> int:
        return self.bbox[2] - self.bbox[0]

    @property
    def height(self) -> int:
        return self.bbox[3] - self.bbox[1]

    def mask_array(self) -> np.ndarray:
        if self.mask is not None:
            return self.mask
        return np.ones((self.height, self.width), dtype=bool)


def image_id_of_region(region_id: str) -> str:
    """Recover the owning image id from a region id."""
    image_id, sep, _ = region_id.rpartition("#")
    if not sep or not image_id:
        raise ValueError(f"region id '{region_id}' does not embed an image id")
    return image_id


def _grid_edges(extent: int, g: int) -> list[int]:
    step = extent // g
    return [i * step for i in range(g)] + [extent]


def segment(
    image: np.ndarray, config: SegmenterConfig, image_id: str = "img"
) -> list[Region]:
    """Partition image pixels into regions per the configured strategy."""
    if config.strategy != "grid":
        raise ValueError(f"unknown segmentation strategy '{config.strategy}'")
    return _segment_grid(image, config.grid_size, image_id)


def _segment_grid(image: np.ndarray, g: int, image_id: str) -> list[Region]:
    if g < 1:
        raise ValueError("grid size must be >= 1")
    h, w = image.shape[:2]
    if h < g or w < g:
        raise ValueError(f"image {w}x{h} smaller than required {g}x{g} grid")
    xs = _grid_edges(w, g)
    ys = _grid_edges(h, g)
    total = float(w * h)
    regions = []
    for row in range(g):
        for col in range(g):
            x0, x1 = xs[col], xs[col + 1]
            y0, y1 = ys[row], ys[row + 1]
            regions.append(
                Region(
                    region_id=f"{image_id}#g{row:02d}{col:02d}",
                    image_id=image_id,
                    bbox=(x0, y0, x1, y1),
                    area_fraction=(x1 - x0) * (y1 - y0) / total,
                    centroid=((x0 + x1) / 2.0 / w, (y0 + y1) / 2.0 / h),
                )
            )
    return regions


def write_region_table(regions: list[Region], path: Path | str) -> None:
    """Persist regions as TSV: region_id, image_id, bbox, area_fraction, centroid."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in regions:
            x0, y0, x1, y1 = r.bbox
            fh.write(
                f"{r.region_id}\t{r.image_id}\t{x0},{y0},{x1},{y1}\t"
                f"{r.area_fraction:.9f}\t{r.centroid[0]:.9f},{r.centroid[1]:.9f}\n"
            )


def load_region_table(path: Path | str) -> list[Region]:
    path = Path(path)
    regions = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path.name} line {lineno}: expected 5 fields")
            x0, y0, x1, y1 = (int(v) for v in fields[2].split(","))
            cx, cy = (float(v) for v in fields[4].split(","))
            regions.append(
                Region(
                    region_id=fields[0],
                    image_id=fields[1],
                    bbox=(x0, y0, x1, y1),
                    area_fraction=float(fields[3]),
                    centroid=(cx, cy),
                )
            )
    return regions
