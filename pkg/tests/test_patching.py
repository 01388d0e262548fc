import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import points_in_rect, rank_oracle
from pathrag.errors import ImageTooSmall, OutOfBounds
from pathrag.imaging import RgbImage
from pathrag.nuclei import Nucleus
from pathrag.patching import (Patch, count_nuclei_in_patch, crop, rank_patches,
                              random_patches, tile_patches)


def nuclei_at(points):
    return [Nucleus(float(x), float(y), 20, 1.0) for x, y in points]


def test_tiling_260():
    patches = tile_patches(260, 260)
    assert len(patches) == 9
    assert {p.width for p in patches} == {100} and {p.height for p in patches} == {100}
    assert sorted({p.x for p in patches}) == [0, 80, 160]
    assert sorted({p.y for p in patches}) == [0, 80, 160]
    assert patches[4].x == 80 and patches[4].y == 80
    assert patches[1].x - patches[0].x == 80  # overlap 100 - 80 = 20 px


def test_tiling_130():
    patches = tile_patches(130, 130)
    assert {p.width for p in patches} == {50}
    assert sorted({p.x for p in patches}) == [0, 40, 80]


def test_tiling_too_small():
    with pytest.raises(ImageTooSmall):
        tile_patches(2, 100)


def test_index_encodes_row_major_position():
    patches = tile_patches(300, 200)
    for p in patches:
        assert p.row == p.index // 3 and p.col == p.index % 3
        assert p.x == patches[p.col].x and p.y == patches[3 * p.row].y


def check_axis(length, offsets, extent):
    covered = np.zeros(length, bool)
    for o in offsets:
        assert 0 <= o and o + extent <= length
        covered[o:o + extent] = True
    assert covered.all()
    for a, b in zip(offsets, offsets[1:]):
        assert abs((a + extent - b) - 0.2 * extent) <= 1.0


@settings(max_examples=500, deadline=None)
@given(st.integers(3, 4000), st.integers(3, 4000))
def test_coverage_and_overlap(w, h):
    patches = tile_patches(w, h)
    assert len(patches) == 9
    check_axis(w, sorted({p.x for p in patches}), patches[0].width)
    check_axis(h, sorted({p.y for p in patches}), patches[0].height)


def test_half_open_containment():
    p = Patch(0, 10, 20, 30, 40)
    assert count_nuclei_in_patch(p, nuclei_at([(40, 25)])) == 0
    assert count_nuclei_in_patch(p, nuclei_at([(10, 20)])) == 1
    assert count_nuclei_in_patch(p, nuclei_at([(39.999, 59.999)])) == 1
    assert count_nuclei_in_patch(p, nuclei_at([(20, 60)])) == 0


def test_counts_match_point_in_rect_oracle():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 260, (50, 2)).tolist()
    nuc = nuclei_at(pts)
    patches = tile_patches(260, 260)
    counts = [count_nuclei_in_patch(p, nuc) for p in patches]
    assert counts == [points_in_rect(pts, p.x, p.y, p.width, p.height) for p in patches]
    assert sum(counts) >= len(pts)


def test_rank_ties_by_index():
    ranked = rank_patches(tile_patches(90, 90), [], 3)
    assert [r.patch.index for r in ranked] == [0, 1, 2]
    assert [r.rank for r in ranked] == [0, 1, 2]


def test_rank_hand_sorted_example():
    wanted = [9, 1, 1, 1, 7, 1, 1, 1, 8]
    # disjoint rectangles so each count is set independently
    patches = [Patch(i, 10 * i, 0, 5, 5) for i in range(9)]
    nuc = []
    for i, n in enumerate(wanted):
        nuc += nuclei_at([(10 * i + 1, 1)] * n)
    ranked = rank_patches(patches, nuc, 3)
    assert [r.patch.index for r in ranked] == [0, 8, 4]
    assert [r.nuclei_count for r in ranked] == [9, 8, 7]
    assert rank_patches(patches, nuc, 0) == []


@pytest.mark.parametrize("seed", range(100))
def test_rank_matches_sort_oracle(seed):
    rng = np.random.default_rng(seed)
    w, h = (int(v) for v in rng.integers(30, 600, 2))
    pts = np.column_stack([rng.uniform(0, w, 40), rng.uniform(0, h, 40)]).round(0).tolist()
    patches = tile_patches(w, h)
    top_k = int(rng.integers(0, 10))
    counts = [points_in_rect(pts, p.x, p.y, p.width, p.height) for p in patches]
    ranked = rank_patches(patches, nuclei_at(pts), top_k)
    assert [r.patch.index for r in ranked] == rank_oracle(counts, top_k)
    assert all(a.nuclei_count >= b.nuclei_count for a, b in zip(ranked, ranked[1:]))


def test_random_patches_deterministic_and_complete():
    patches = tile_patches(100, 100)
    assert random_patches(patches, 3, 7) == random_patches(patches, 3, 7)
    every = random_patches(patches, 9, 1)
    assert sorted(p.index for p in every) == list(range(9))
    assert random_patches(patches, 0, 1) == []


def test_random_patches_uniform():
    patches = tile_patches(100, 100)
    freq = np.zeros(9)
    draws = 10_000
    for seed in range(draws):
        for p in random_patches(patches, 3, seed):
            freq[p.index] += 1
    freq /= draws
    assert np.all((freq >= 0.30) & (freq <= 0.37)), freq


def test_crop():
    px = np.random.default_rng(0).integers(0, 256, (260, 260, 3), dtype=np.uint8)
    img = RgbImage(px)
    assert crop(img, Patch(0, 0, 0, 260, 260)).tobytes() == img.tobytes()
    assert crop(img, Patch(0, 0, 0, 1, 1)).data == px[0, 0].tolist()
    p4 = tile_patches(260, 260)[4]
    c = crop(img, p4)
    assert (c.width, c.height) == (100, 100)
    assert np.array_equal(c.pixels, px[80:180, 80:180])
    with pytest.raises(OutOfBounds):
        crop(img, Patch(0, 200, 0, 100, 10))
