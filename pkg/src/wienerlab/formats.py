"""Image file I/O: binary PGM (P5, 8/16-bit) and the WKIMG1 raw float format.

PGM samples are scaled to [0, 1] by dividing by maxval on read and written
by clamping to [0, 1] and scaling by maxval.  WKIMG1 stores unquantized
little-endian f32 row-major data behind a magic and u32 dimensions.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import InvalidInputError
from .spectral import as_grid

IMAGE_MAGIC = b"WKIMG1"


def atomic_write(path, data: bytes) -> None:
    """Write a file via temp-then-rename so failures leave no partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".wk-tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pgm(path, image: np.ndarray, maxval: int = 65535) -> None:
    """Write a [0, 1]-scaled image as binary PGM; values are clamped."""
    image = as_grid(image, "image")
    if maxval not in (255, 65535):
        raise InvalidInputError(f"pgm: maxval must be 255 or 65535, got {maxval}")
    h, w = image.shape
    quant = np.rint(np.clip(image, 0.0, 1.0) * maxval)
    raw = quant.astype(">u2" if maxval == 65535 else "u1").tobytes()
    atomic_write(path, f"P5\n{w} {h}\n{maxval}\n".encode() + raw)


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM into a [0, 1] float grid."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise InvalidInputError(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval; separated by whitespace/comments.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise InvalidInputError(f"{path}: malformed PGM header") from e
    if maxval not in (255, 65535):
        raise InvalidInputError(f"{path}: unsupported maxval {maxval}")
    dtype = ">u2" if maxval == 65535 else "u1"
    pixels = np.frombuffer(data, dtype=dtype, count=h * w, offset=pos)
    if pixels.size != h * w:
        raise InvalidInputError(f"{path}: truncated pixel data")
    return pixels.reshape(h, w).astype(np.float64) / maxval


def write_image(path, image: np.ndarray) -> None:
    """Write the WKIMG1 raw float format (magic, u32 H, u32 W, f32 row-major)."""
    image = as_grid(image, "image")
    h, w = image.shape
    atomic_write(path, IMAGE_MAGIC + struct.pack("<II", h, w) + image.astype("<f4").tobytes())


def read_image(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(IMAGE_MAGIC):
        raise InvalidInputError(f"{path}: not a WKIMG1 file")
    h, w = struct.unpack("<II", data[6:14])
    pixels = np.frombuffer(data, dtype="<f4", offset=14)
    if pixels.size != h * w:
        raise InvalidInputError(f"{path}: expected {h * w} samples, got {pixels.size}")
    return pixels.reshape(h, w).astype(np.float64)


def load_any(path) -> np.ndarray:
    """Read either format, sniffing the magic."""
    with open(path, "rb") as f:
        magic = f.read(6)
    if magic.startswith(b"P5"):
        return read_pgm(path)
    if magic == IMAGE_MAGIC:
        return read_image(path)
    raise InvalidInputError(f"{path}: unrecognized image format")
