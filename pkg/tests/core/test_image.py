# tests/core/test_image.py
# -*- coding: utf-8 -*-

"""
Pruebas unitarias para los contenedores de píxeles y la E/S PNG (engine/core/image.py).
"""

import numpy as np
import pytest
from PIL import Image

from engine.core.errors import ImageIOError, ImageValidationError
from engine.core.image import (
    Image8,
    ImageF,
    Kernel2D,
    Mask,
    composite,
    convolve,
    denormalize,
    encode_png,
    montage,
    normalize,
    read_png,
    write_png,
)


# --- Funciones Auxiliares de Prueba ---

def make_random_image(h: int = 12, w: int = 10, seed: int = 0) -> Image8:
    gen = np.random.default_rng(seed)
    return Image8(gen.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def make_delta_image(size: int = 9, value: int = 255) -> Image8:
    data = np.zeros((size, size, 3), dtype=np.uint8)
    data[size // 2, size // 2] = value
    return Image8(data)


def make_mask(h: int, w: int, value: float) -> Mask:
    return Mask(np.full((h, w), float(value)))


# --- Normalización ---

def test_normalize_endpoints_and_formula():
    """0 -> −1, 255 -> +1, 51 -> −0.6."""
    img = Image8(np.array([[[0, 255, 51]]], dtype=np.uint8))
    out = normalize(img).data[0, 0]
    assert out[0] == -1.0
    assert out[1] == 1.0
    assert out[2] == pytest.approx(-0.6, abs=1e-12)


def test_denormalize_rounds_half_to_even():
    """0.0 -> 127.5 -> 128 con redondeo half-to-even."""
    img = ImageF(np.array([[[-1.0, 1.0, 0.0]]]))
    assert denormalize(img).data[0, 0].tolist() == [0, 255, 128]


def test_normalize_denormalize_identity_on_all_values():
    """La ida y vuelta es la identidad en los 256 valores de canal."""
    values = np.arange(256, dtype=np.uint8)
    img = Image8(np.stack([values, values[::-1], values], axis=-1)[None, ...])
    assert denormalize(normalize(img)) == img


def test_denormalize_rejects_non_finite():
    with pytest.raises(ImageValidationError):
        denormalize(ImageF(np.array([[[np.nan, 0.0, 0.0]]])))


def test_image8_rejects_bad_shape_and_range():
    with pytest.raises(ImageValidationError):
        Image8(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ImageValidationError):
        Image8(np.full((2, 2, 3), 300, dtype=np.int32))


def test_mask_range_is_validated():
    with pytest.raises(ImageValidationError):
        Mask(np.full((2, 2), 1.5))
    assert make_mask(2, 2, 1.0).is_binary()


# --- Convolución ---

def test_convolve_identity_kernel_keeps_image():
    img = make_random_image()
    assert convolve(img, Kernel2D.identity()) == img


def test_convolve_constant_image_is_invariant():
    img = Image8.constant(10, 10, (37, 200, 91))
    kernel = Kernel2D.gaussian(5, 1.3)
    assert convolve(img, kernel) == img


def test_convolve_box_on_delta():
    """Kernel 3×3 de 1/9 sobre un delta de 255: nueve píxeles de round(255/9) = 28."""
    out = convolve(make_delta_image(), Kernel2D.box(3)).data[..., 0]
    assert out[3:6, 3:6].tolist() == [[28] * 3] * 3
    assert int(out.sum()) == 28 * 9


def test_convolve_rejects_kernel_larger_than_image():
    with pytest.raises(ImageValidationError):
        convolve(Image8.constant(3, 3, (0, 0, 0)), Kernel2D.box(5))


def test_kernel_must_sum_to_one_and_be_odd():
    with pytest.raises(ImageValidationError):
        Kernel2D(np.ones((3, 3)))
    with pytest.raises(ImageValidationError):
        Kernel2D(np.full((2, 2), 0.25))


# --- Composición ---

def test_composite_full_and_empty_mask():
    restored = normalize(make_random_image(6, 6))
    out_full = composite(restored, make_mask(6, 6, 1.0))
    out_empty = composite(restored, make_mask(6, 6, 0.0))
    np.testing.assert_array_equal(out_full.data, restored.data)
    assert np.all(out_empty.data == -1.0)


def test_composite_half_mask_averages_to_zero():
    restored = ImageF(np.ones((4, 4, 3)))
    out = composite(restored, make_mask(4, 4, 0.5), background=(-1.0, -1.0, -1.0))
    np.testing.assert_allclose(out.data, 0.0, atol=1e-15)


def test_composite_shape_mismatch():
    with pytest.raises(ImageValidationError):
        composite(ImageF(np.zeros((4, 4, 3))), make_mask(3, 4, 1.0))


def test_imagef_rejects_out_of_range_values():
    with pytest.raises(ImageValidationError):
        ImageF(np.full((2, 2, 3), 1.5))
    with pytest.raises(ImageValidationError):
        ImageF(np.full((2, 2, 3), -1.0 - 1e-9))


def test_composite_rejects_background_out_of_range():
    restored = normalize(make_random_image(4, 4))
    with pytest.raises(ImageValidationError):
        composite(restored, make_mask(4, 4, 0.5), background=(2.0, 0.0, 0.0))


# --- E/S PNG ---

def test_png_roundtrip_and_deterministic_bytes(tmp_path):
    img = make_random_image()
    path = write_png(img, tmp_path / "a.png", metadata={"b": "2", "a": "1"})
    assert read_png(path) == img
    assert encode_png(img, {"a": "1", "b": "2"}) == path.read_bytes()


def test_read_png_rejects_alpha_and_gray(tmp_path):
    Image.new("RGBA", (4, 4)).save(tmp_path / "rgba.png")
    Image.new("L", (4, 4)).save(tmp_path / "gray.png")
    with pytest.raises(ImageValidationError):
        read_png(tmp_path / "rgba.png")
    with pytest.raises(ImageValidationError):
        read_png(tmp_path / "gray.png")


def test_read_png_missing_and_garbage(tmp_path):
    with pytest.raises(ImageIOError):
        read_png(tmp_path / "nope.png")
    (tmp_path / "garbage.png").write_bytes(b"not a png at all, just bytes")
    with pytest.raises(ImageValidationError):
        read_png(tmp_path / "garbage.png")


def test_montage_grid_shape():
    frames = [Image8.constant(4, 5, (i, i, i)) for i in range(10)]
    sheet = montage(frames, columns=4)
    assert sheet.shape == (12, 20)
    assert sheet.data[4, 5, 0] == 5
    assert sheet.data[11, 19, 0] == 0
