"""Hashing, RSA signing and base64url transport encoding.

These are the primitives every posting and verification step composes.
Signatures are deterministic (PKCS#1 v1.5 padding) so a post's publicly
displayed key-code is reproducible and comparable as a string.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
from dataclasses import dataclass

from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa, utils

from .errors import ConfigurationError, EncodingError, ModeError, SigningError

PrivateKey = rsa.RSAPrivateKey
PublicKey = rsa.RSAPublicKey

SUPPORTED_MODULUS_BITS = (2048, 3072, 4096)
DEFAULT_MODULUS_BITS = 2048
DIGEST_SIZE = 32

# EMSA-PKCS1-v1_5 block skeleton: 0x00 0x01 <at least 8 bytes 0xFF> 0x00 <data>
_PKCS1_OVERHEAD = 11

_B64_ALPHABET = frozenset(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_="
)


@dataclass(frozen=True)
class KeyPair:
    """An account owner's signing material.

    The public half is always derivable from the private half; it is never
    stored separately so the two cannot drift apart.
    """

    private_key: PrivateKey

    @property
    def public_key(self) -> PublicKey:
        return self.private_key.public_key()


def generate_keypair(modulus_bits: int = DEFAULT_MODULUS_BITS) -> KeyPair:
    """Generate a fresh RSA key pair.

    Args:
        modulus_bits: Modulus size; one of 2048, 3072 or 4096.

    Raises:
        ConfigurationError: For any other size.
    """
    if modulus_bits not in SUPPORTED_MODULUS_BITS:
        raise ConfigurationError(
            f"unsupported modulus size {modulus_bits}; "
            f"choose one of {SUPPORTED_MODULUS_BITS}"
        )
    key = rsa.generate_private_key(public_exponent=65537, key_size=modulus_bits)
    return KeyPair(private_key=key)


def digest(data: bytes) -> bytes:
    """SHA-256 digest of ``data``; always 32 bytes, pure."""
    return hashlib.sha256(data).digest()


def segment_size(key: PrivateKey | PublicKey) -> int:
    """Signature segment length in bytes (the key modulus size)."""
    return key.key_size // 8


def sign_digest(d: bytes, private_key: PrivateKey) -> bytes:
    """Sign a 32-byte digest, producing one key-code segment.

    Deterministic: the same (digest, key) input always yields the same bytes.
    """
    if len(d) != DIGEST_SIZE:
        raise SigningError(f"expected a {DIGEST_SIZE}-byte digest, got {len(d)} bytes")
    try:
        return private_key.sign(
            d, padding.PKCS1v15(), utils.Prehashed(hashes.SHA256())
        )
    except Exception as exc:  # corrupt or unusable key material
        raise SigningError(f"signing failed: {exc}") from exc


def verify_segment(d: bytes, segment: bytes, public_key: PublicKey) -> bool:
    """True iff ``segment`` signs digest ``d`` under ``public_key``.

    Malformed input of any kind yields False, never an exception.
    """
    try:
        public_key.verify(
            segment, d, padding.PKCS1v15(), utils.Prehashed(hashes.SHA256())
        )
        return True
    except Exception:
        return False


def max_direct_bytes(key: PrivateKey | PublicKey) -> int:
    """Longest message signable without hashing under this key."""
    return segment_size(key) - _PKCS1_OVERHEAD


def _pkcs1_block(data: bytes, k: int) -> bytes:
    return b"\x00\x01" + b"\xff" * (k - len(data) - 3) + b"\x00" + data


def sign_direct(data: bytes, private_key: PrivateKey) -> bytes:
    """Sign raw message bytes without hashing them first.

    Verifiers can recover the padded plaintext with the bare public-key
    operation and compare it to the displayed message, which keeps the
    key-code checkable by generic RSA tools. Only short messages fit:
    at most ``max_direct_bytes(key)``.

    Raises:
        ModeError: When the message exceeds the padding-limited maximum.
    """
    k = segment_size(private_key)
    limit = k - _PKCS1_OVERHEAD
    if len(data) > limit:
        raise ModeError(
            f"message of {len(data)} bytes exceeds the {limit}-byte direct-sign "
            f"limit for this key; use hashed mode"
        )
    m = int.from_bytes(_pkcs1_block(data, k), "big")
    try:
        pn = private_key.private_numbers()
        p, q = pn.p, pn.q
        # CRT: s = s2 + q * (iqmp * (s1 - s2) mod p)
        s1 = pow(m % p, pn.dmp1, p)
        s2 = pow(m % q, pn.dmq1, q)
        s = s2 + q * ((pn.iqmp * (s1 - s2)) % p)
    except Exception as exc:
        raise SigningError(f"signing failed: {exc}") from exc
    return s.to_bytes(k, "big")


def verify_direct(data: bytes, segment: bytes, public_key: PublicKey) -> bool:
    """True iff ``segment`` is a direct (unhashed) signature of ``data``."""
    k = segment_size(public_key)
    if len(segment) != k or len(data) > k - _PKCS1_OVERHEAD:
        return False
    nums = public_key.public_numbers()
    s = int.from_bytes(segment, "big")
    if s >= nums.n:
        return False
    recovered = pow(s, nums.e, nums.n).to_bytes(k, "big")
    return hmac.compare_digest(recovered, _pkcs1_block(data, k))


def encode64(b: bytes) -> str:
    """URL-safe base64 with padding always emitted."""
    return base64.urlsafe_b64encode(b).decode("ascii")


def decode64(t: str) -> bytes:
    """Inverse of :func:`encode64`; strict.

    Rejects characters outside the URL-safe alphabet (reporting the offset of
    the first bad character), misplaced padding, and non-canonical encodings.
    """
    for i, ch in enumerate(t):
        if ch not in _B64_ALPHABET:
            raise EncodingError(f"invalid base64url character {ch!r}", offset=i)
    first_pad = t.find("=")
    if first_pad != -1 and any(ch != "=" for ch in t[first_pad:]):
        raise EncodingError("padding may only trail the text", offset=first_pad)
    if len(t) % 4 != 0:
        raise EncodingError(
            f"length {len(t)} is not a multiple of 4", offset=len(t)
        )
    try:
        raw = base64.urlsafe_b64decode(t)
    except (binascii.Error, ValueError) as exc:
        raise EncodingError(f"undecodable base64url text: {exc}") from exc
    if encode64(raw) != t:
        raise EncodingError("non-canonical base64url encoding")
    return raw


def export_public_key(public_key: PublicKey) -> str:
    """Public key as base64url of its DER SubjectPublicKeyInfo bytes."""
    der = public_key.public_bytes(
        serialization.Encoding.DER,
        serialization.PublicFormat.SubjectPublicKeyInfo,
    )
    return encode64(der)


def load_public_key(text: str) -> PublicKey:
    """Inverse of :func:`export_public_key`."""
    der = decode64(text)
    try:
        key = serialization.load_der_public_key(der)
    except Exception as exc:
        raise EncodingError(f"not a DER public key: {exc}") from exc
    if not isinstance(key, rsa.RSAPublicKey):
        raise ConfigurationError("only RSA public keys are supported")
    return key


def export_private_key_pem(private_key: PrivateKey) -> bytes:
    """Private key as unencrypted PKCS#8 PEM, for key files and custody storage."""
    return private_key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )


def load_private_key_pem(data: bytes) -> PrivateKey:
    """Inverse of :func:`export_private_key_pem`."""
    try:
        key = serialization.load_pem_private_key(data, password=None)
    except Exception as exc:
        raise EncodingError(f"not a PEM private key: {exc}") from exc
    if not isinstance(key, rsa.RSAPrivateKey):
        raise ConfigurationError("only RSA private keys are supported")
    return key
