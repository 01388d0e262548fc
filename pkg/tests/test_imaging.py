import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from pathrag.errors import CorruptImage, ImageNotFound, UnsupportedFormat
from pathrag.imaging import (OD_CEILING, OdImage, RgbImage, load_image, od_to_rgb,
                             rgb_to_od, save_image)


def _png(tmp_path, name, array, mode=None):
    path = tmp_path / name
    Image.fromarray(np.asarray(array, dtype=np.uint8), mode=mode).save(path)
    return path


def test_load_white_pixel(tmp_path):
    img = load_image(_png(tmp_path, "w.png", [[[255, 255, 255]]]))
    assert (img.width, img.height, img.data) == (1, 1, [255, 255, 255])


def test_load_known_bytes(tmp_path):
    img = load_image(_png(tmp_path, "p.png", [[[0, 0, 0], [255, 0, 0]]]))
    assert (img.width, img.height) == (2, 1)
    assert img.data == [0, 0, 0, 255, 0, 0]


def test_truncated_png_is_corrupt(tmp_path):
    good = _png(tmp_path, "g.png", np.random.default_rng(0).integers(0, 255, (32, 32, 3)))
    bad = tmp_path / "bad.png"
    bad.write_bytes(good.read_bytes()[:60])
    with pytest.raises(CorruptImage):
        load_image(bad)


def test_missing_file(tmp_path):
    with pytest.raises(ImageNotFound):
        load_image(tmp_path / "nope.png")


def test_unsupported_format(tmp_path):
    path = tmp_path / "x.bmp"
    Image.new("RGB", (2, 2)).save(path)
    with pytest.raises(UnsupportedFormat):
        load_image(path)
    txt = tmp_path / "x.txt"
    txt.write_text("hello")
    with pytest.raises(UnsupportedFormat):
        load_image(txt)


def test_grayscale_expanded_and_alpha_dropped(tmp_path):
    gray = load_image(_png(tmp_path, "g.png", [[7, 200]], mode="L"))
    assert gray.data == [7, 7, 7, 200, 200, 200]
    rgba = load_image(_png(tmp_path, "a.png", [[[10, 20, 30, 0]]], mode="RGBA"))
    assert rgba.data == [10, 20, 30]


def test_jpeg_roundtrip_shape(tmp_path):
    img = RgbImage(np.full((5, 4, 3), 128, dtype=np.uint8))
    save_image(img, tmp_path / "x.jpg")
    back = load_image(tmp_path / "x.jpg")
    assert (back.width, back.height) == (4, 5)


def test_rgb_image_invariants():
    with pytest.raises(ValueError):
        RgbImage(np.zeros((0, 3, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        RgbImage.from_flat(2, 2, [0] * 11)
    with pytest.raises(ValueError):
        RgbImage(np.full((1, 1, 3), 300))


@pytest.mark.parametrize("value, expected", [
    (255, 0.0),
    (26, 0.99157),   # -log10(26/255)
    (0, 2.40654),    # clamped to intensity 1: -log10(1/255)
])
def test_rgb_to_od_examples(value, expected):
    od = rgb_to_od(RgbImage(np.full((1, 1, 3), value, dtype=np.uint8)))
    assert od.values[0, 0, 0] == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("od, expected", [(0.0, 255), (0.99157, 26), (2.40654, 1)])
def test_od_to_rgb_examples(od, expected):
    rgb = od_to_rgb(OdImage(np.full((1, 1, 3), od)))
    assert rgb.pixels[0, 0, 0] == expected


def test_od_ceiling_matches_hand_value():
    assert OD_CEILING == pytest.approx(2.40654, abs=1e-4)


def test_roundtrip_every_intensity():
    values = np.arange(1, 256, dtype=np.uint8)
    img = RgbImage(np.stack([values] * 3, axis=-1).reshape(1, 255, 3))
    assert od_to_rgb(rgb_to_od(img)) == img


def test_od_strictly_decreasing():
    values = np.arange(1, 256, dtype=np.uint8)
    od = rgb_to_od(RgbImage(np.stack([values] * 3, axis=-1).reshape(1, 255, 3))).values[0, :, 0]
    assert np.all(np.diff(od) < 0)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_conversions_preserve_dimensions(w, h, seed):
    px = np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)
    od = rgb_to_od(RgbImage(px))
    assert (od.width, od.height) == (w, h)
    assert np.all(od.values >= 0) and np.all(od.values <= OD_CEILING + 1e-12)
    back = od_to_rgb(od)
    assert (back.width, back.height) == (w, h)
    nz = px >= 1
    assert np.array_equal(back.pixels[nz], px[nz])


def test_images_are_immutable():
    img = RgbImage(np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        img.pixels[0, 0, 0] = 1
