import numpy as np
import pytest
from hypothesis import given, strategies as st

from tagsift.segmenter import (
    Region,
    SegmenterConfig,
    image_id_of_region,
    load_region_table,
    segment,
    write_region_table,
)


def blank(h, w):
    return np.zeros((h, w, 3), dtype=np.uint8)


def test_even_grid_edges():
    regions = segment(blank(64, 64), SegmenterConfig(grid_size=4), "img")
    assert len(regions) == 16
    xs = sorted({r.bbox[0] for r in regions})
    assert xs == [0, 16, 32, 48]
    assert all(r.bbox[2] - r.bbox[0] == 16 for r in regions)


def test_remainder_goes_to_last_row_and_column():
    regions = segment(blank(65, 67), SegmenterConfig(grid_size=4), "img")
    widths = {r.bbox[2] - r.bbox[0] for r in regions}
    heights = {r.bbox[3] - r.bbox[1] for r in regions}
    assert widths == {16, 19}
    assert heights == {16, 17}
    last = regions[-1]
    assert last.bbox[2] == 67 and last.bbox[3] == 65


def test_area_fractions_sum_to_one():
    regions = segment(blank(50, 70), SegmenterConfig(grid_size=3), "img")
    assert sum(r.area_fraction for r in regions) == pytest.approx(1.0)


def test_region_ids_embed_image_and_cell():
    regions = segment(blank(16, 16), SegmenterConfig(grid_size=2), "photo-7")
    assert [r.region_id for r in regions] == [
        "photo-7#g0000",
        "photo-7#g0001",
        "photo-7#g0100",
        "photo-7#g0101",
    ]
    assert all(image_id_of_region(r.region_id) == "photo-7" for r in regions)


def test_centroids_are_normalized_cell_centers():
    regions = segment(blank(32, 32), SegmenterConfig(grid_size=2), "img")
    assert regions[0].centroid == (0.25, 0.25)
    assert regions[-1].centroid == (0.75, 0.75)


def test_too_small_image_raises():
    with pytest.raises(ValueError, match="smaller"):
        segment(blank(3, 64), SegmenterConfig(grid_size=4), "img")


def test_unknown_strategy_raises():
    with pytest.raises(ValueError, match="strategy"):
        segment(blank(16, 16), SegmenterConfig(strategy="slic"), "img")


def test_default_mask_is_full_bbox():
    region = segment(blank(16, 16), SegmenterConfig(grid_size=2), "img")[0]
    mask = region.mask_array()
    assert mask.shape == (8, 8)
    assert mask.all()


@given(
    h=st.integers(min_value=8, max_value=80),
    w=st.integers(min_value=8, max_value=80),
    g=st.integers(min_value=1, max_value=8),
)
def test_grid_tiles_partition_every_pixel(h, w, g):
    if h < g or w < g:
        return
    regions = segment(blank(h, w), SegmenterConfig(grid_size=g), "img")
    covered = np.zeros((h, w), dtype=np.int64)
    for r in regions:
        x0, y0, x1, y1 = r.bbox
        covered[y0:y1, x0:x1] += 1
    assert (covered == 1).all()


def test_region_table_roundtrip(tmp_path):
    regions = segment(blank(33, 65), SegmenterConfig(grid_size=4), "img-x")
    path = tmp_path / "regions.tsv"
    write_region_table(regions, path)
    loaded = load_region_table(path)
    assert len(loaded) == len(regions)
    for a, b in zip(regions, loaded):
        assert a.region_id == b.region_id
        assert a.image_id == b.image_id
        assert a.bbox == b.bbox
        assert a.area_fraction == pytest.approx(b.area_fraction)
        assert a.centroid[0] == pytest.approx(b.centroid[0])
        assert a.centroid[1] == pytest.approx(b.centroid[1])
