"""Image file formats.

``.sgi``: 16-byte header (8-byte magic ``b"SGPIMG\\x00\\x01"``, uint32 rows,
uint32 cols, little-endian) followed by row-major little-endian float64 data.

``.pgm``: binary portable graymap with maxval 65535.  Writing rescales the
image linearly onto ``[0, 65535]``; reading returns the raw counts.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SGPIMG\x00\x01"
_HEADER = struct.Struct("<8sII")


class ImageFormatError(ValueError):
    pass


def write_raw(path, image):
    image = np.ascontiguousarray(image, dtype="<f8")
    if image.ndim != 2:
        raise ImageFormatError("only 2-D images are supported")
    rows, cols = image.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        fh.write(image.tobytes())


def read_raw(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ImageFormatError("file too short for header")
    magic, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ImageFormatError(f"bad magic {magic!r}")
    expected = _HEADER.size + 8 * rows * cols
    if len(blob) != expected:
        raise ImageFormatError(f"expected {expected} bytes, found {len(blob)}")
    return np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(float)


def write_pgm(path, image):
    image = np.asarray(image, dtype=float)
    lo, hi = float(image.min()), float(image.max())
    span = hi - lo if hi > lo else 1.0
    counts = np.rint((image - lo) / span * 65535.0).astype(">u2")
    rows, cols = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(counts.tobytes())


def _pgm_tokens(blob):
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos])
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    (magic, cols, rows, maxval), offset = _pgm_tokens(blob)
    if magic != b"P5":
        raise ImageFormatError("only binary PGM (P5) is supported")
    cols, rows, maxval = int(cols), int(rows), int(maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    data = np.frombuffer(blob, dtype=dtype, count=rows * cols, offset=offset)
    return data.reshape(rows, cols).astype(float)


def read_image(path) -> np.ndarray:
    """Dispatch on suffix: ``.pgm`` or the raw binary format."""
    if str(path).lower().endswith(".pgm"):
        return read_pgm(path)
    return read_raw(path)


def write_image(path, image):
    if str(path).lower().endswith(".pgm"):
        write_pgm(path, image)
    else:
        write_raw(path, image)
