"""Tile montages that summarize a group of regions for review.

A collage shows the whole images behind a group, not the cropped
regions: an isolated patch of sky or road is unreadable, while the
surrounding picture lets a reviewer judge relevance at a glance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from .segmenter import image_id_of_region

_BACKGROUND = (24, 24, 24)


@dataclass(frozen=True)
class CollageConfig:
    max_tiles: int = 25
    tile_px: int = 128

    def __post_init__(self) -> None:
        if self.max_tiles < 1:
            raise ValueError("max_tiles must be >= 1")
        if self.tile_px < 4:
            raise ValueError("tile_px must be >= 4")


def _letterbox(pixels: np.ndarray, side: int) -> Image.Image:
    """Resize to fit a square tile, preserving aspect, centered on dark."""
    source = Image.fromarray(np.asarray(pixels, dtype=np.uint8))
    scale = side / max(source.width, source.height)
    width = max(1, round(source.width * scale))
    height = max(1, round(source.height * scale))
    resized = source.resize((width, height), Image.BILINEAR)
    tile = Image.new("RGB", (side, side), _BACKGROUND)
    tile.paste(resized, ((side - width) // 2, (side - height) // 2))
    return tile


def render_collage(
    member_region_ids: list[str],
    image_for: Callable[[str], np.ndarray],
    config: CollageConfig | None = None,
) -> tuple[Image.Image, list[str]]:
    """Montage the distinct parent images behind a set of regions.

    Parent images are deduplicated and laid out in image id order,
    row-major on a ceil(sqrt(tiles))-column grid, at most max_tiles of
    them.  Images that fail to load are skipped with a warning; only
    when every tile fails is the collage an error.  Returns the canvas
    and the image ids actually shown, in tile order.
    """
    cfg = config or CollageConfig()
    if not member_region_ids:
        raise ValueError("cannot render a collage of zero regions")
    parents = sorted({image_id_of_region(rid) for rid in member_region_ids})
    tiles: list[tuple[str, Image.Image]] = []
    for image_id in parents:
        if len(tiles) == cfg.max_tiles:
            break
        try:
            pixels = image_for(image_id)
        except (OSError, KeyError, ValueError) as exc:
            warnings.warn(f"skipping unloadable image '{image_id}': {exc}")
            continue
        tiles.append((image_id, _letterbox(pixels, cfg.tile_px)))
    if not tiles:
        raise ValueError("every parent image failed to load")

    columns = math.isqrt(len(tiles))
    if columns * columns < len(tiles):
        columns += 1
    rows = (len(tiles) + columns - 1) // columns
    canvas = Image.new(
        "RGB", (columns * cfg.tile_px, rows * cfg.tile_px), _BACKGROUND
    )
    for index, (_, tile) in enumerate(tiles):
        canvas.paste(
            tile, ((index % columns) * cfg.tile_px, (index // columns) * cfg.tile_px)
        )
    return canvas, [image_id for image_id, _ in tiles]


def save_collage(image: Image.Image, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path, format="PNG")


def write_legend(path: Path | str, image_ids: list[str]) -> None:
    """Tile order record: one `index<TAB>image_id` line per tile."""
    with open(path, "w", encoding="utf-8") as fh:
        for index, image_id in enumerate(image_ids):
            fh.write(f"{index}\t{image_id}\n")
