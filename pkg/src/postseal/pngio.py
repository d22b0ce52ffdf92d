"""Byte-stable PNG reading and writing.

Stamped images are signed over their encoded file bytes, so the writer is
pinned down to one canonical form: 8-bit RGB or RGBA, no interlacing, every
scanline filtered with type 0, one IDAT chunk compressed at zlib level 6,
and no ancillary chunks. Any PNG (or other Pillow-readable lossless file)
can be *read*; only the writer is constrained.
"""

from __future__ import annotations

import io
import struct
import zlib
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EncodingError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_COMPRESS_LEVEL = 6


def _chunk(tag: bytes, body: bytes) -> bytes:
    return (
        struct.pack(">I", len(body))
        + tag
        + body
        + struct.pack(">I", zlib.crc32(tag + body))
    )


def _check_pixels(pixels: np.ndarray) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] not in (3, 4):
        raise ValueError(
            f"expected an HxWx3 or HxWx4 array, got shape {arr.shape}"
        )
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must contain at least one pixel")
    return arr


def encode_png(pixels: np.ndarray) -> bytes:
    """Encode an HxWx3 (RGB) or HxWx4 (RGBA) uint8 array to canonical PNG bytes."""
    arr = _check_pixels(pixels)
    height, width, channels = arr.shape
    color_type = 2 if channels == 3 else 6
    ihdr = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    raw = b"".join(b"\x00" + row.tobytes() for row in arr)
    idat = zlib.compress(raw, _COMPRESS_LEVEL)
    return (
        PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", idat)
        + _chunk(b"IEND", b"")
    )


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes to an HxWx3 or HxWx4 uint8 array.

    Grayscale and palette images are expanded to RGB (or RGBA when they carry
    transparency), which is lossless per pixel.
    """
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format != "PNG":
                raise EncodingError(f"expected PNG data, found {im.format}")
            if im.mode not in ("RGB", "RGBA"):
                target = "RGBA" if ("A" in im.mode or "transparency" in im.info) else "RGB"
                im = im.convert(target)
            return np.asarray(im, dtype=np.uint8)
    except EncodingError:
        raise
    except Exception as exc:
        raise EncodingError(f"undecodable image data: {exc}") from exc


def load_png(path: str | Path) -> np.ndarray:
    return decode_png(Path(path).read_bytes())


def save_png(pixels: np.ndarray, path: str | Path) -> bytes:
    """Write canonical PNG bytes to ``path`` and return them."""
    data = encode_png(pixels)
    Path(path).write_bytes(data)
    return data
