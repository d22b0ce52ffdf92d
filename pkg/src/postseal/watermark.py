"""Embed a known byte payload into an image and detect it again later.

The scheme is a plain sequential LSB watermark: the frame's bits land in the
least significant bit of the R, G and B channels in row-major pixel order,
most significant bit of each byte first. Alpha channels are never written.

Frame layout (normative, bit-exact):

    magic "WMK1" (4 bytes) | payload length, 16-bit big-endian (2 bytes)
    | payload | CRC-32 of payload, big-endian (4 bytes)

Detection is targeted: it answers whether one particular byte string is
embedded, which is all the verification protocol ever needs. The security of
a post comes from the signature *inside* the payload, not from hiding it.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import CapacityError

MAGIC = b"WMK1"
_LENGTH_BYTES = 2
_CRC_BYTES = 4
FRAME_OVERHEAD = len(MAGIC) + _LENGTH_BYTES + _CRC_BYTES
MAX_PAYLOAD_BYTES = 0xFFFF


def _rgb_bits(img: np.ndarray) -> np.ndarray:
    # Row-major pixel order, channels R,G,B; alpha (if any) is skipped.
    return np.ascontiguousarray(img[:, :, :3]).reshape(-1)


def capacity(img: np.ndarray) -> int:
    """Payload bytes this image can carry, zero if the frame itself won't fit."""
    height, width = img.shape[0], img.shape[1]
    return max(0, (width * height * 3) // 8 - FRAME_OVERHEAD)


def _frame(payload: bytes) -> bytes:
    return (
        MAGIC
        + len(payload).to_bytes(_LENGTH_BYTES, "big")
        + payload
        + zlib.crc32(payload).to_bytes(_CRC_BYTES, "big")
    )


def embed(payload: bytes, img: np.ndarray) -> np.ndarray:
    """Return a copy of ``img`` carrying ``payload`` in its LSB plane.

    Per-channel pixel values change by at most 1; dimensions and channel
    count are preserved.

    Raises:
        CapacityError: When the payload does not fit.
        ValueError: For an empty or over-long (> 65535 bytes) payload.
    """
    if not payload:
        raise ValueError("payload must not be empty")
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise ValueError(
            f"payload of {len(payload)} bytes exceeds the "
            f"{MAX_PAYLOAD_BYTES}-byte frame limit"
        )
    room = capacity(img)
    if len(payload) > room:
        raise CapacityError(required=len(payload), available=room)

    bits = np.unpackbits(np.frombuffer(_frame(payload), dtype=np.uint8))
    out = np.array(img, dtype=np.uint8, copy=True)
    channels = _rgb_bits(out)
    channels[: bits.size] = (channels[: bits.size] & 0xFE) | bits
    out[:, :, :3] = channels.reshape(out.shape[0], out.shape[1], 3)
    return out


def _read_frame(img: np.ndarray) -> bytes | None:
    lsbs = _rgb_bits(img) & 1
    usable_bytes = lsbs.size // 8
    if usable_bytes < FRAME_OVERHEAD:
        return None
    stream = np.packbits(lsbs[: usable_bytes * 8]).tobytes()
    if stream[: len(MAGIC)] != MAGIC:
        return None
    length = int.from_bytes(stream[len(MAGIC) : len(MAGIC) + _LENGTH_BYTES], "big")
    end = FRAME_OVERHEAD + length
    if length == 0 or end > usable_bytes:
        return None
    payload = stream[len(MAGIC) + _LENGTH_BYTES : len(MAGIC) + _LENGTH_BYTES + length]
    crc = int.from_bytes(stream[end - _CRC_BYTES : end], "big")
    if zlib.crc32(payload) != crc:
        return None
    return payload


def detect(img: np.ndarray, payload: bytes) -> bool:
    """True iff a CRC-valid frame is present and carries exactly ``payload``.

    Absence, corruption and payload mismatch all yield False; pure function.
    """
    found = _read_frame(img)
    return found is not None and found == payload


def extract(img: np.ndarray) -> bytes | None:
    """Diagnostic blind extraction: the embedded payload, or None.

    Verification never relies on this; it always checks for a known payload
    via :func:`detect`.
    """
    return _read_frame(img)
