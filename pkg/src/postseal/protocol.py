"""Composing and verifying posts across the four roles.

A is the account owner, B the trusted signer (which may equally run on the
client), C the publisher and D any third-party verifier. Three schemes:

* text: one signature segment over the message digest (or over the raw
  message bytes in direct mode).
* pictured-simple: the text segment is additionally embedded into every
  attached image as a watermark. Two posts with identical text share a
  key-code, so text and images from different posts of one account can be
  recombined undetectably; kept for comparison and for its lighter flow.
* pictured-provable: the first segment signs the timestamped message; each
  image is stamped with that segment and then signed *as encoded file
  bytes* by one further segment. Stamp first, then hash the stamped PNG:
  the extra segments cover the published image, not the original.

Every verify function consumes only public data and returns a
:class:`~postseal.models.VerificationResult` listing each check by name.
"""

from __future__ import annotations

import secrets
import time
from dataclasses import dataclass

import numpy as np

from . import crypto, pngio, watermark
from .crypto import KeyPair, PrivateKey, PublicKey
from .errors import (
    CapacityError,
    ClockError,
    ConfigurationError,
    EncodingError,
)
from .models import (
    CUSTODY_MODES,
    CUSTODY_TTP,
    HASHING_DIRECT,
    HASHING_HASHED,
    HASHING_MODES,
    SCHEME_PROVABLE,
    SCHEME_SIMPLE,
    SCHEME_TEXT,
    Account,
    Check,
    EvidenceBundle,
    ImageRef,
    KeyCode,
    PostRecord,
    ProvablePicturedPost,
    SimplePicturedPost,
    TextPost,
    VerificationResult,
    sha256_hex,
)

# Separates message bytes from the decimal timestamp when both are signed.
# 0x1F cannot occur inside a decimal suffix, which makes the pairing injective.
TIMESTAMP_SEPARATOR = b"\x1f"

DEFAULT_MAX_MESSAGE_BYTES = 4096

POST_ID_HEX_CHARS = 16


def canonicalize(message: str, timestamp: int | None = None) -> bytes:
    """Byte string that gets digested and signed for a post.

    Without a timestamp this is exactly the UTF-8 message; with one it is
    message bytes, 0x1F, then the ASCII decimal seconds. Messages may not
    contain 0x1F themselves: the separator cannot occur in a decimal
    suffix, so with that one character reserved the mapping is injective
    over all accepted (message, timestamp) pairs, including across
    timestamped and untimestamped posts.
    """
    if "\x1f" in message:
        raise ValueError("messages may not contain the reserved separator U+001F")
    data = message.encode("utf-8")
    if timestamp is None:
        return data
    if timestamp < 0:
        raise ValueError("timestamps are non-negative Unix seconds")
    return data + TIMESTAMP_SEPARATOR + str(int(timestamp)).encode("ascii")


def _check_message(message: str, max_message_bytes: int) -> bytes:
    if "\x1f" in message:
        raise ConfigurationError(
            "messages may not contain the reserved separator U+001F"
        )
    data = message.encode("utf-8")
    if len(data) > max_message_bytes:
        raise ConfigurationError(
            f"message of {len(data)} bytes exceeds the configured "
            f"{max_message_bytes}-byte limit"
        )
    return data


def _as_pixels(image: bytes | np.ndarray) -> np.ndarray:
    if isinstance(image, (bytes, bytearray, memoryview)):
        return pngio.decode_png(bytes(image))
    return image


def stamp_images(
    payload: bytes, images: list[bytes | np.ndarray] | tuple
) -> tuple[bytes, ...]:
    """Embed ``payload`` into every image and return canonical PNG bytes.

    Raises CapacityError carrying the index of the first image that cannot
    hold the payload.
    """
    stamped = []
    for i, image in enumerate(images):
        pixels = _as_pixels(image)
        try:
            marked = watermark.embed(payload, pixels)
        except CapacityError as exc:
            raise CapacityError(
                required=exc.required, available=exc.available, image_index=i
            ) from None
        stamped.append(pngio.encode_png(marked))
    return tuple(stamped)


# ---------------------------------------------------------------------------
# Text posts
# ---------------------------------------------------------------------------


def compose_text_post(
    message: str,
    private_key: PrivateKey,
    hashing_mode: str = HASHING_HASHED,
    max_message_bytes: int = DEFAULT_MAX_MESSAGE_BYTES,
) -> TextPost:
    """Sign a text-only post into a one-segment key-code.

    In hashed mode the segment signs the SHA-256 of the message; in direct
    mode the raw message bytes are signed without hashing, which keeps the
    key-code independently checkable with plain RSA tools but caps the
    message at the padding limit.
    """
    data = _check_message(message, max_message_bytes)
    if hashing_mode == HASHING_HASHED:
        segment = crypto.sign_digest(crypto.digest(data), private_key)
    elif hashing_mode == HASHING_DIRECT:
        segment = crypto.sign_direct(data, private_key)
    else:
        raise ConfigurationError(f"unknown hashing mode {hashing_mode!r}")
    return TextPost(
        message=message, hashing_mode=hashing_mode, keycode=KeyCode((segment,))
    )


def _parse_keycode(
    keycode: str | KeyCode, checks: list[Check]
) -> KeyCode | None:
    if isinstance(keycode, KeyCode):
        return keycode
    try:
        return KeyCode.parse(keycode)
    except EncodingError as exc:
        checks.append(Check("keycode-parse", False, f"unparseable key-code: {exc}"))
        return None


def _structure_check(
    checks: list[Check], got: int, expected: int, why: str
) -> bool:
    ok = got == expected
    detail = f"{expected} segment(s) expected {why}, key-code has {got}"
    checks.append(Check("structure", ok, "" if ok else detail))
    return ok


def _message_check(message: str, checks: list[Check]) -> bool:
    # No honestly composed post can contain the reserved separator, so a
    # verifier must reject it rather than let it alias a timestamped signing.
    if "\x1f" in message:
        checks.append(
            Check("message", False, "message contains the reserved separator U+001F")
        )
        return False
    return True


def verify_text_post(
    message: str,
    keycode: str | KeyCode,
    public_key: PublicKey | str,
    hashing_mode: str = HASHING_HASHED,
) -> VerificationResult:
    """Check a text post's key-code against its plaintext and public key."""
    checks: list[Check] = []
    public_key = _load_key(public_key, checks)
    code = _parse_keycode(keycode, checks)
    if public_key is None or code is None or not _message_check(message, checks):
        return VerificationResult(tuple(checks))
    if not _structure_check(checks, len(code.segments), 1, "for a text post"):
        return VerificationResult(tuple(checks))
    data = message.encode("utf-8")
    if hashing_mode == HASHING_DIRECT:
        ok = crypto.verify_direct(data, code.segments[0], public_key)
    else:
        ok = crypto.verify_segment(crypto.digest(data), code.segments[0], public_key)
    checks.append(
        Check(
            "keycode-segment-1",
            ok,
            "signature matches the message" if ok else "signature mismatch",
        )
    )
    return VerificationResult(tuple(checks))


# ---------------------------------------------------------------------------
# Pictured posts, simple scheme
# ---------------------------------------------------------------------------


def compose_pictured_post_simple(
    message: str,
    images: list[bytes | np.ndarray],
    private_key: PrivateKey,
    max_message_bytes: int = DEFAULT_MAX_MESSAGE_BYTES,
) -> SimplePicturedPost:
    """Sign a message and stamp every attached image with the same segment."""
    if not images:
        raise ConfigurationError("a pictured post needs at least one image")
    data = _check_message(message, max_message_bytes)
    segment = crypto.sign_digest(crypto.digest(data), private_key)
    stamped = stamp_images(segment, images)
    return SimplePicturedPost(
        message=message, images=stamped, keycode=KeyCode((segment,))
    )


def verify_pictured_post_simple(
    message: str,
    keycode: str | KeyCode,
    images: list[bytes],
    public_key: PublicKey | str,
) -> VerificationResult:
    """Check the text segment and that every image carries it as a watermark."""
    checks: list[Check] = []
    public_key = _load_key(public_key, checks)
    code = _parse_keycode(keycode, checks)
    if public_key is None or code is None or not _message_check(message, checks):
        return VerificationResult(tuple(checks))
    if not images:
        checks.append(Check("structure", False, "a pictured post needs at least one image"))
        return VerificationResult(tuple(checks))
    if not _structure_check(checks, len(code.segments), 1, "for this scheme"):
        return VerificationResult(tuple(checks))
    segment = code.segments[0]
    ok = crypto.verify_segment(
        crypto.digest(message.encode("utf-8")), segment, public_key
    )
    checks.append(
        Check(
            "keycode-segment-1",
            ok,
            "signature matches the message" if ok else "signature mismatch",
        )
    )
    _check_watermarks(checks, images, segment)
    return VerificationResult(tuple(checks))


def _check_watermarks(checks: list[Check], images: list[bytes], payload: bytes):
    for i, png in enumerate(images):
        name = f"watermark-image-{i}"
        try:
            pixels = pngio.decode_png(png)
        except EncodingError as exc:
            checks.append(Check(name, False, f"undecodable image: {exc}"))
            continue
        found = watermark.detect(pixels, payload)
        checks.append(
            Check(
                name,
                found,
                "image carries the key-code watermark"
                if found
                else "watermark missing or mismatched",
            )
        )


def _load_key(
    public_key: PublicKey | str, checks: list[Check]
) -> PublicKey | None:
    if not isinstance(public_key, str):
        return public_key
    try:
        return crypto.load_public_key(public_key)
    except (EncodingError, ConfigurationError) as exc:
        checks.append(Check("public-key", False, f"unusable public key: {exc}"))
        return None


# ---------------------------------------------------------------------------
# Pictured posts, provable scheme
# ---------------------------------------------------------------------------


def compose_pictured_post_provable(
    message: str,
    timestamp: int,
    images: list[bytes | np.ndarray],
    private_key: PrivateKey,
    last_timestamp: int | None = None,
    max_message_bytes: int = DEFAULT_MAX_MESSAGE_BYTES,
) -> ProvablePicturedPost:
    """Compose a post whose key-code binds message, timestamp and images.

    Segment 1 signs the digest of the timestamped message. Every image is
    stamped with segment 1, and segment i+1 then signs the digest of stamped
    image i's encoded bytes, so the published file itself is covered.
    """
    if not images:
        raise ConfigurationError("a pictured post needs at least one image")
    if last_timestamp is not None and timestamp < last_timestamp:
        raise ClockError(
            f"timestamp {timestamp} precedes the account's last post "
            f"timestamp {last_timestamp}"
        )
    data = _check_message(message, max_message_bytes)
    first = crypto.sign_digest(
        crypto.digest(canonicalize(message, timestamp)), private_key
    )
    stamped = stamp_images(first, images)
    segments = [first]
    for png in stamped:
        segments.append(crypto.sign_digest(crypto.digest(png), private_key))
    return ProvablePicturedPost(
        message=message,
        timestamp=timestamp,
        images=stamped,
        keycode=KeyCode(tuple(segments)),
    )


def verify_pictured_post_provable(
    message: str,
    timestamp: int,
    keycode: str | KeyCode,
    images: list[bytes],
    public_key: PublicKey | str,
) -> VerificationResult:
    """Full verification of a provable pictured post.

    Three groups of checks, each reported separately: segment 1 against the
    timestamped message, the watermark of every image against segment 1, and
    segment i+1 against the digest of image i's file bytes.
    """
    checks: list[Check] = []
    public_key = _load_key(public_key, checks)
    code = _parse_keycode(keycode, checks)
    if public_key is None or code is None or not _message_check(message, checks):
        return VerificationResult(tuple(checks))
    if not images:
        checks.append(Check("structure", False, "a pictured post needs at least one image"))
        return VerificationResult(tuple(checks))
    if not _structure_check(
        checks, len(code.segments), 1 + len(images), "(one per image plus one)"
    ):
        return VerificationResult(tuple(checks))
    first = code.segments[0]
    ok = crypto.verify_segment(
        crypto.digest(canonicalize(message, timestamp)), first, public_key
    )
    checks.append(
        Check(
            "keycode-segment-1",
            ok,
            "signature matches the timestamped message"
            if ok
            else "signature mismatch",
        )
    )
    _check_watermarks(checks, images, first)
    for i, png in enumerate(images):
        name = f"keycode-segment-{i + 2}"
        ok = crypto.verify_segment(crypto.digest(png), code.segments[i + 1], public_key)
        checks.append(
            Check(
                name,
                ok,
                "signature matches the image bytes" if ok else "signature mismatch",
            )
        )
    return VerificationResult(tuple(checks))


# ---------------------------------------------------------------------------
# Evidence bundles
# ---------------------------------------------------------------------------


def verify_bundle(bundle: EvidenceBundle) -> VerificationResult:
    """Verify an evidence bundle with the scheme-appropriate verifier.

    Consumes nothing outside the bundle itself.
    """
    image_bytes = [img.data for img in bundle.images]
    if bundle.scheme == SCHEME_TEXT:
        return verify_text_post(
            bundle.message, bundle.keycode, bundle.public_key, bundle.hashing_mode
        )
    if bundle.scheme == SCHEME_SIMPLE:
        return verify_pictured_post_simple(
            bundle.message, bundle.keycode, image_bytes, bundle.public_key
        )
    if bundle.scheme == SCHEME_PROVABLE:
        if bundle.timestamp is None:
            return VerificationResult(
                (Check("structure", False, "provable post requires a timestamp"),)
            )
        return verify_pictured_post_provable(
            bundle.message,
            bundle.timestamp,
            bundle.keycode,
            image_bytes,
            bundle.public_key,
        )
    return VerificationResult(
        (Check("scheme", False, f"unknown scheme {bundle.scheme!r}"),)
    )


# ---------------------------------------------------------------------------
# Registration and persisted posting (role B workflows over a store)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Registration:
    """What a fresh registration hands back to the account owner.

    ``token`` authenticates later posting calls against the HTTP service.
    ``private_key_pem`` is a one-time receipt, only present when the trusted
    party generated and keeps the key.
    """

    account: Account
    token: str
    private_key_pem: bytes | None = None


def register(
    store,
    user_id: str,
    custody: str = CUSTODY_TTP,
    keypair: KeyPair | None = None,
    public_key: PublicKey | str | None = None,
    modulus_bits: int = crypto.DEFAULT_MODULUS_BITS,
    created_at: int | None = None,
) -> Registration:
    """Register an account.

    In ttp-held custody the private key (generated here unless supplied) is
    stored so the service can sign on the owner's behalf. In client-held
    custody only the public key is ever stored.
    """
    if custody not in CUSTODY_MODES:
        raise ConfigurationError(
            f"unknown custody mode {custody!r}; choose one of {CUSTODY_MODES}"
        )
    if not user_id:
        raise ConfigurationError("user_id must not be empty")

    private_pem = None
    if custody == CUSTODY_TTP:
        if keypair is None:
            keypair = crypto.generate_keypair(modulus_bits)
        pub = keypair.public_key
        private_pem = crypto.export_private_key_pem(keypair.private_key)
    else:
        if keypair is not None:
            pub = keypair.public_key
        elif public_key is not None:
            pub = (
                crypto.load_public_key(public_key)
                if isinstance(public_key, str)
                else public_key
            )
        else:
            raise ConfigurationError(
                "client-held custody requires a public key at registration"
            )

    account = Account(
        user_id=user_id,
        public_key=crypto.export_public_key(pub),
        custody=custody,
        created_at=int(time.time()) if created_at is None else created_at,
    )
    token = secrets.token_urlsafe(32)
    store.put_account(
        account, token_hash=sha256_hex(token.encode("ascii")), private_key_pem=private_pem
    )
    return Registration(account=account, token=token, private_key_pem=private_pem)


def make_post_id(rendered_keycode: str) -> str:
    """Content-addressed post id: digest prefix of the rendered key-code."""
    return sha256_hex(rendered_keycode.encode("ascii"))[:POST_ID_HEX_CHARS]


def create_post(
    store,
    user_id: str,
    scheme: str,
    message: str,
    images: list[bytes | np.ndarray] = (),
    timestamp: int | None = None,
    hashing_mode: str = HASHING_HASHED,
    private_key: PrivateKey | None = None,
    max_message_bytes: int = DEFAULT_MAX_MESSAGE_BYTES,
) -> PostRecord:
    """Compose, persist and return a post for a registered account.

    For ttp-held accounts the stored key signs; client-held accounts must
    pass their private key in. Provable posts take their timestamp from the
    caller or the clock, guarded to be monotone per account.
    """
    account = store.require_account(user_id)
    if private_key is None:
        if account.custody != CUSTODY_TTP:
            raise ConfigurationError(
                f"account {user_id!r} is client-held; supply its private key"
            )
        private_key = store.load_private_key(user_id)
    if hashing_mode not in HASHING_MODES:
        raise ConfigurationError(f"unknown hashing mode {hashing_mode!r}")
    if hashing_mode == HASHING_DIRECT and scheme != SCHEME_TEXT:
        raise ConfigurationError("direct mode applies to text posts only")

    record_ts = int(time.time()) if timestamp is None else timestamp
    last = store.last_timestamp(user_id)
    if last is not None and record_ts < last:
        raise ClockError(
            f"timestamp {record_ts} precedes the account's last post "
            f"timestamp {last}"
        )

    if scheme == SCHEME_TEXT:
        if images:
            raise ConfigurationError("text posts cannot carry images")
        post = compose_text_post(message, private_key, hashing_mode, max_message_bytes)
        stamped: tuple[bytes, ...] = ()
    elif scheme == SCHEME_SIMPLE:
        post = compose_pictured_post_simple(
            message, images, private_key, max_message_bytes
        )
        stamped = post.images
    elif scheme == SCHEME_PROVABLE:
        post = compose_pictured_post_provable(
            message,
            record_ts,
            images,
            private_key,
            max_message_bytes=max_message_bytes,
        )
        stamped = post.images
    else:
        raise ConfigurationError(f"unknown scheme {scheme!r}")

    rendered = post.keycode.render()
    named = [(f"image-{i}.png", data) for i, data in enumerate(stamped)]
    record = PostRecord(
        post_id=make_post_id(rendered),
        user_id=user_id,
        scheme=scheme,
        message=message,
        timestamp=record_ts,
        keycode=rendered,
        images=tuple(ImageRef(name=n, sha256=sha256_hex(d)) for n, d in named),
        status="published",
        hashing_mode=hashing_mode,
    )
    store.put_post(record, named)
    return record
