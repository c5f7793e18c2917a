import numpy as np
import pytest

from tileguide.imageio import (
    ImageFormatError,
    read_image,
    synthetic_input,
    write_image,
)


def test_pgm_round_trip(tmp_path):
    img = np.random.default_rng(0).random((13, 7))
    path = tmp_path / "a.pgm"
    write_image(path, img)
    back = read_image(path)
    assert back.shape == (13, 7)
    quantized = np.clip(np.rint(img * 255), 0, 255) / 255.0
    assert np.allclose(back, quantized)
    assert np.array_equal(read_image(path), back)


def test_ppm_round_trip(tmp_path):
    img = np.random.default_rng(1).random((8, 5, 3))
    path = tmp_path / "a.ppm"
    write_image(path, img)
    back = read_image(path)
    assert back.shape == (8, 5, 3)
    assert np.allclose(back, np.rint(img * 255) / 255.0, atol=1 / 255)


def test_f64_round_trip_bit_exact(tmp_path):
    img = np.random.default_rng(2).random((6, 9, 3))
    path = tmp_path / "a.f64"
    write_image(path, img)
    assert np.array_equal(read_image(path), img)


def test_pgm_requires_2d(tmp_path):
    with pytest.raises(ImageFormatError):
        write_image(tmp_path / "x.pgm", np.zeros((2, 2, 3)))
    with pytest.raises(ImageFormatError):
        write_image(tmp_path / "x.ppm", np.zeros((2, 2)))
    with pytest.raises(ImageFormatError):
        write_image(tmp_path / "x.bmp", np.zeros((2, 2)))


def test_unknown_format(tmp_path):
    path = tmp_path / "junk.pgm"
    path.write_bytes(b"not an image")
    with pytest.raises(ImageFormatError):
        read_image(path)


def test_pnm_comment_header(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 2\n255\n\x00\x7f\xff\x10")
    img = read_image(path)
    assert img.shape == (2, 2)


def test_synthetic_input_deterministic_and_positive():
    a = synthetic_input((16, 12, 3))
    b = synthetic_input((16, 12, 3))
    assert np.array_equal(a, b)
    assert a.min() > 0 and a.max() <= 1
