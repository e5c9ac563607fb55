"""Grayscale PGM input/output and seeded Gaussian noise.

Images are plain 2-D ``float64`` arrays of shape ``(height, width)``.
Intensities are kept unclamped in memory; clamping to ``[0, 255]`` only
happens in :func:`save_pgm`.

Noise is drawn from :func:`numpy.random.default_rng` (PCG64 bit generator,
ziggurat normal sampler).  Both algorithms are fixed by NumPy's stream
compatibility policy, so the same seed gives the same noise on every
platform.
"""

from dataclasses import dataclass
import os
import re

import numpy as np

__all__ = [
    "PGMError",
    "UnsupportedMagicError",
    "MalformedHeaderError",
    "TruncatedPayloadError",
    "NoiseSpec",
    "load_pgm",
    "save_pgm",
    "add_noise",
    "rng_from_seed",
]


class PGMError(ValueError):
    """Base class for PGM parse errors; ``offset`` is the failing byte."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedMagicError(PGMError):
    pass


class MalformedHeaderError(PGMError):
    pass


class TruncatedPayloadError(PGMError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise level and generator seed."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


_TOKEN = re.compile(rb"\s*(?:#[^\n\r]*[\n\r]\s*)*")


def _next_token(data, pos):
    """Skip whitespace/comments, return ``(token, start, end)``."""
    m = _TOKEN.match(data, pos)
    start = m.end()
    end = start
    while end < len(data) and not data[end:end + 1].isspace() and data[end:end + 1] != b"#":
        end += 1
    return data[start:end], start, end


def _header_int(data, pos, what):
    tok, start, end = _next_token(data, pos)
    if not tok:
        raise MalformedHeaderError(f"missing {what}", start)
    if not tok.isdigit():
        raise MalformedHeaderError(f"invalid {what} {tok[:16]!r}", start)
    return int(tok), end


def parse_pgm(data):
    """Parse the bytes of a P2 or P5 file into a float image."""
    if data[:2] not in (b"P2", b"P5"):
        raise UnsupportedMagicError(f"unsupported magic {data[:2]!r}", 0)
    magic = data[:2]
    pos = 2
    if len(data) > 2 and not (data[2:3].isspace() or data[2:3] == b"#"):
        raise MalformedHeaderError("magic number not followed by whitespace", 2)
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise MalformedHeaderError("image dimensions must be positive", pos)
    if not 0 < maxval <= 65535:
        raise MalformedHeaderError(f"maxval {maxval} outside 1..65535", pos)
    count = width * height

    if magic == b"P5":
        # Exactly one whitespace byte separates the header from the raster.
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise MalformedHeaderError("expected whitespace after maxval", pos)
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(data) - pos < need:
            raise TruncatedPayloadError(
                f"payload has {len(data) - pos} bytes, expected {need}", len(data))
        pixels = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    else:
        values = []
        for _ in range(count):
            tok, start, pos = _next_token(data, pos)
            if not tok:
                raise TruncatedPayloadError(
                    f"payload has {len(values)} samples, expected {count}", start)
            if not tok.isdigit():
                raise MalformedHeaderError(f"invalid sample {tok[:16]!r}", start)
            values.append(int(tok))
        pixels = np.asarray(values)
    if pixels.max(initial=0) > maxval:
        raise MalformedHeaderError("sample exceeds maxval", pos)
    return pixels.astype(np.float64).reshape(height, width)


def load_pgm(path):
    """Read a binary (P5) or ASCII (P2) PGM file.

    Parameters
    ----------
    path : str or path-like
      File to read.

    Returns
    -------
    image : ndarray
      ``(height, width)`` float64 array of raw sample values.

    Raises
    ------
    UnsupportedMagicError, MalformedHeaderError, TruncatedPayloadError
      On invalid content; each carries the byte ``offset`` of the problem.
    """
    with open(path, "rb") as f:
        return parse_pgm(f.read())


def save_pgm(image, path):
    """Write `image` as an 8-bit binary PGM (P5, maxval 255).

    Values are rounded to the nearest integer (``numpy.rint``) and clamped
    to ``[0, 255]``.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("expected a 2-D grayscale image")
    samples = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    h, w = samples.shape
    with open(os.fspath(path), "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(samples.tobytes())


def rng_from_seed(seed):
    """The package-wide deterministic generator (PCG64)."""
    return np.random.default_rng(np.uint64(seed))


def add_noise(image, spec):
    """Return ``image + sigma * g`` with ``g`` i.i.d. standard normal.

    ``g`` is drawn from :func:`rng_from_seed` ``(spec.seed)``, so repeated
    calls with the same arguments are bit-identical.
    """
    image = np.asarray(image, dtype=np.float64)
    if spec.sigma == 0:
        return image.copy()
    g = rng_from_seed(spec.seed).standard_normal(image.shape)
    return image + spec.sigma * g
