import numpy as np
import pytest

from patchmodels.imageio import (MalformedHeaderError, NoiseSpec, PGMError,
                                 TruncatedPayloadError, UnsupportedMagicError, add_noise,
                                 load_pgm, parse_pgm, save_pgm)


def test_parse_ascii():
    img = parse_pgm(b"P2 2 2 255 0 255 128 64")
    np.testing.assert_array_equal(img, [[0, 255], [128, 64]])
    assert img.dtype == np.float64


def test_parse_binary_matches_ascii():
    img = parse_pgm(b"P5\n2 2\n255\n" + bytes([0x00, 0xFF, 0x80, 0x40]))
    np.testing.assert_array_equal(img, [[0, 255], [128, 64]])


def test_comments_are_skipped():
    data = b"P2\n# a comment\n2 1 # trailing\n# another\n255\n7 9\n"
    np.testing.assert_array_equal(parse_pgm(data), [[7, 9]])


def test_sixteen_bit_big_endian():
    img = parse_pgm(b"P5 2 1 65535\n" + bytes([0x01, 0x02, 0xFF, 0xFF]))
    np.testing.assert_array_equal(img, [[0x0102, 65535]])


def test_unsupported_magic():
    with pytest.raises(UnsupportedMagicError, match="unsupported magic") as e:
        parse_pgm(b"P6 1 1 255 \x00\x00\x00")
    assert e.value.offset == 0


@pytest.mark.parametrize("data", [b"P2 2", b"P5 x 2 255 ", b"P5 2 2 70000 ", b"P2 0 2 255"])
def test_malformed_header(data):
    with pytest.raises(MalformedHeaderError):
        parse_pgm(data)


def test_truncated_payload_reports_offset():
    with pytest.raises(TruncatedPayloadError) as e:
        parse_pgm(b"P5 2 2 255\n\x00\x01")
    assert e.value.offset == 13  # end of the available payload
    with pytest.raises(PGMError):
        parse_pgm(b"P2 2 2 255 1 2 3")


def test_save_clamps_and_rounds(tmp_path):
    path = tmp_path / "x.pgm"
    save_pgm(np.array([[-3.2, 12.6], [300, 128]]), path)
    np.testing.assert_array_equal(load_pgm(path), [[0, 13], [255, 128]])
    assert path.read_bytes().startswith(b"P5\n2 2\n255\n")


def test_round_trip(tmp_path):
    path = tmp_path / "y.pgm"
    for img in (np.zeros((8, 8)),
                np.random.default_rng(1).integers(0, 256, (5, 7)).astype(float)):
        save_pgm(img, path)
        np.testing.assert_array_equal(load_pgm(path), img)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(-1.0, 0)
    with pytest.raises(ValueError):
        NoiseSpec(1.0, -5)


def test_zero_sigma_is_identity():
    img = np.arange(12.0).reshape(3, 4)
    out = add_noise(img, NoiseSpec(0.0, 123))
    np.testing.assert_array_equal(out, img)
    assert out is not img


def test_noise_moments():
    img = np.full((1000, 1000), 100.0)
    d = add_noise(img, NoiseSpec(20.0, 7)) - img
    assert abs(d.std() / 20.0 - 1) < 0.01
    assert abs(d.mean()) < 0.1


def test_noise_determinism():
    img = np.zeros((16, 16))
    a = add_noise(img, NoiseSpec(5.0, 3))
    np.testing.assert_array_equal(a, add_noise(img, NoiseSpec(5.0, 3)))
    assert np.any(a != add_noise(img, NoiseSpec(5.0, 4)))
