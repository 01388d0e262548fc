import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import synth
from pathrag.errors import DegenerateCovariance, InsufficientTissue
from pathrag.imaging import OdImage, RgbImage, od_to_intensity
from pathrag.stain import (DEFAULT_REFERENCE, StainMatrix, compute_concentrations,
                           estimate_stain_matrix, normalize_stains)


def angle_deg(a, b):
    """Independent check: angle between two vectors from their dot product."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    cos = float(a @ b) / (np.sqrt(a @ a) * np.sqrt(b @ b))
    return float(np.degrees(np.arccos(min(1.0, max(-1.0, cos)))))


def recovery_error(matrix):
    return max(angle_deg(matrix.hematoxylin, synth.REF_H), angle_deg(matrix.eosin, synth.REF_E))


@pytest.mark.xfail(strict=True, reason=(
    "with both concentrations uniform in [0.3, 1.5] no pixel is near a pure stain, so "
    "the 1st/99th percentile angles sit ~4-5 degrees inside the true basis"))
def test_uniform_mixture_recovery_within_two_degrees():
    img, _ = synth.stained_image(np.random.default_rng(0), side=71)
    assert recovery_error(estimate_stain_matrix(img)) <= 2.0


def test_uniform_mixture_recovery_error_is_bounded():
    # what the percentile-angle method does achieve on that fixture
    img, _ = synth.stained_image(np.random.default_rng(0), side=71)
    assert recovery_error(estimate_stain_matrix(img)) < 6.0


@pytest.mark.parametrize("seed", range(20))
def test_recovery_with_pure_stain_pixels(seed):
    img, _ = synth.stained_image(np.random.default_rng(seed), side=71, pure_fraction=0.5)
    assert img.width * img.height >= 5000
    assert recovery_error(estimate_stain_matrix(img)) <= 2.0


def test_all_white_is_insufficient_tissue():
    with pytest.raises(InsufficientTissue):
        estimate_stain_matrix(RgbImage(np.full((64, 64, 3), 255, dtype=np.uint8)))


def test_single_colour_is_degenerate():
    with pytest.raises(DegenerateCovariance):
        estimate_stain_matrix(RgbImage(np.full((64, 64, 3), (120, 60, 150), dtype=np.uint8)))


def test_white_pixel_has_zero_concentration():
    c = compute_concentrations(RgbImage(np.full((1, 1, 3), 255, dtype=np.uint8)),
                               DEFAULT_REFERENCE.matrix)
    assert c[0, 0].tolist() == [0.0, 0.0]


@pytest.mark.parametrize("ch, ce", [(1.0, 0.0), (0.5, 0.7)])
def test_unmix_forward_synthesized_pixel(ch, ce):
    od = ch * synth.REF_H + ce * synth.REF_E
    c = compute_concentrations(OdImage(od.reshape(1, 1, 3)), DEFAULT_REFERENCE.matrix)
    assert c[0, 0] == pytest.approx([ch, ce], abs=1e-3)


def _reference_image(seed, side=80):
    rng = np.random.default_rng(seed)
    od, conc = synth.stained_od(rng, side * side, pure_fraction=0.5)
    scale = np.asarray(DEFAULT_REFERENCE.max_concentrations) / np.percentile(conc, 99, axis=0)
    conc = conc * scale
    od = conc @ np.stack([DEFAULT_REFERENCE.matrix.hematoxylin,
                          DEFAULT_REFERENCE.matrix.eosin])
    return RgbImage(od_to_intensity(od).reshape(side, side, 3))


def test_normalization_fixed_point():
    img = _reference_image(3)
    out = normalize_stains(img, DEFAULT_REFERENCE)
    diff = np.abs(out.pixels.astype(int) - img.pixels.astype(int))
    assert diff.max() <= 3


def test_white_regions_stay_white():
    img = _reference_image(4).pixels.copy()
    img[:, :20] = 255
    out = normalize_stains(RgbImage(img))
    assert np.all(out.pixels[:, :20] >= 253)


def test_normalization_is_deterministic():
    img = _reference_image(5)
    assert normalize_stains(img).tobytes() == normalize_stains(img).tobytes()


def test_normalization_preserves_shape_and_range():
    img = _reference_image(6, side=40)
    out = normalize_stains(img)
    assert out.pixels.shape == img.pixels.shape and out.pixels.dtype == np.uint8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.8))
def test_estimated_columns_unit_and_nonnegative(seed, pure):
    img, _ = synth.stained_image(np.random.default_rng(seed), side=30, pure_fraction=pure)
    m = estimate_stain_matrix(img)
    for v in (m.hematoxylin, m.eosin):
        assert abs(np.linalg.norm(v) - 1.0) < 1e-6
        assert np.all(v >= 0)
    # hematoxylin column carries the larger red component
    assert m.hematoxylin[0] >= m.eosin[0]


def test_stain_matrix_validation():
    with pytest.raises(ValueError):
        StainMatrix(np.array([1.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        StainMatrix(np.array([-1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
