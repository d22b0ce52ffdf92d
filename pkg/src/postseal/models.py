"""Domain types: accounts, key-codes, posts, records, evidence bundles."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .crypto import decode64, encode64
from .errors import EncodingError

SCHEME_TEXT = "text"
SCHEME_SIMPLE = "pictured-simple"
SCHEME_PROVABLE = "pictured-provable"
SCHEMES = (SCHEME_TEXT, SCHEME_SIMPLE, SCHEME_PROVABLE)

CUSTODY_TTP = "ttp-held"
CUSTODY_CLIENT = "client-held"
CUSTODY_MODES = (CUSTODY_TTP, CUSTODY_CLIENT)

HASHING_HASHED = "hashed"
HASHING_DIRECT = "direct"
HASHING_MODES = (HASHING_HASHED, HASHING_DIRECT)

EVIDENCE_FORMAT = "postseal-evidence/1"
EVIDENCE_FILENAME = "evidence.json"

# Joins rendered key-code segments; deliberately outside the base64url alphabet.
KEYCODE_SEPARATOR = "."


@dataclass(frozen=True)
class Account:
    """A registered posting identity. ``public_key`` is the exported transport
    form (base64url DER); load it with :func:`postseal.crypto.load_public_key`
    when verifying."""

    user_id: str
    public_key: str
    custody: str
    created_at: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "public_key": self.public_key,
            "custody": self.custody,
            "created_at": self.created_at,
        }

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "Account":
        return cls(
            user_id=d["user_id"],
            public_key=d["public_key"],
            custody=d["custody"],
            created_at=int(d["created_at"]),
        )


@dataclass(frozen=True)
class KeyCode:
    """The public post identifier: one or more signature segments.

    Rendered form: base64url segments joined by ".". Segment 1 always signs
    the (possibly timestamped) text digest; for provable pictured posts,
    segment i+1 signs the encoded bytes of stamped image i.
    """

    segments: tuple[bytes, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a key-code needs at least one segment")

    def render(self) -> str:
        return KEYCODE_SEPARATOR.join(encode64(s) for s in self.segments)

    @classmethod
    def parse(cls, text: str) -> "KeyCode":
        if not text:
            raise EncodingError("empty key-code")
        segments = []
        for part in text.split(KEYCODE_SEPARATOR):
            if not part:
                raise EncodingError("empty key-code segment")
            segments.append(decode64(part))
        return cls(segments=tuple(segments))


@dataclass(frozen=True)
class Check:
    """One named verification step and its outcome."""

    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of a verification run; the verdict is the conjunction of all checks."""

    checks: tuple[Check, ...]

    @property
    def verdict(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
        }


@dataclass(frozen=True)
class TextPost:
    message: str
    hashing_mode: str
    keycode: KeyCode


@dataclass(frozen=True)
class SimplePicturedPost:
    """Message plus images all stamped with the single text-digest segment."""

    message: str
    images: tuple[bytes, ...]  # stamped canonical PNG bytes
    keycode: KeyCode


@dataclass(frozen=True)
class ProvablePicturedPost:
    """Timestamped message with per-image signature segments (1 + N total)."""

    message: str
    timestamp: int
    images: tuple[bytes, ...]  # stamped canonical PNG bytes
    keycode: KeyCode


@dataclass(frozen=True)
class ImageRef:
    """Pointer from a post record into the content-addressed image files."""

    name: str
    sha256: str

    def to_json_dict(self) -> dict[str, str]:
        return {"name": self.name, "sha256": self.sha256}

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "ImageRef":
        return cls(name=d["name"], sha256=d["sha256"])


@dataclass(frozen=True)
class PostRecord:
    """A persisted post. Records are append-only: withdrawal flips ``status``
    but the original evidence is never deleted."""

    post_id: str
    user_id: str
    scheme: str
    message: str
    timestamp: int
    keycode: str
    images: tuple[ImageRef, ...] = ()
    status: str = "published"
    hashing_mode: str = HASHING_HASHED

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "post_id": self.post_id,
            "user_id": self.user_id,
            "scheme": self.scheme,
            "message": self.message,
            "timestamp": self.timestamp,
            "keycode": self.keycode,
            "images": [ref.to_json_dict() for ref in self.images],
            "status": self.status,
            "hashing_mode": self.hashing_mode,
        }

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "PostRecord":
        return cls(
            post_id=d["post_id"],
            user_id=d["user_id"],
            scheme=d["scheme"],
            message=d["message"],
            timestamp=int(d["timestamp"]),
            keycode=d["keycode"],
            images=tuple(ImageRef.from_json_dict(r) for r in d.get("images", [])),
            status=d.get("status", "published"),
            hashing_mode=d.get("hashing_mode", HASHING_HASHED),
        )


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _safe_name(name: str, fallback: str) -> str:
    # Bundle documents may come from anywhere; never let an image entry
    # escape its bundle directory.
    base = Path(name).name
    return base if base not in ("", ".", "..") else fallback


@dataclass(frozen=True)
class ImageEvidence:
    """One image inside an evidence bundle: name, raw bytes, content digest.

    The digest is always recomputed from the bytes actually present, so a
    swapped image file changes the digest rather than breaking the load;
    the verification checks then fail on the merits.
    """

    name: str
    data: bytes

    @property
    def sha256(self) -> str:
        return sha256_hex(self.data)


@dataclass(frozen=True)
class EvidenceBundle:
    """Everything a verifier needs, self-contained: plaintext, timestamp,
    key-code, public key and the stamped image bytes."""

    user_id: str
    scheme: str
    message: str
    keycode: str
    public_key: str
    hashing_mode: str = HASHING_HASHED
    timestamp: int | None = None
    images: tuple[ImageEvidence, ...] = ()

    def to_json_dict(self) -> dict[str, Any]:
        """Inline JSON form (image bytes carried as base64url), as accepted
        and produced by the HTTP service."""
        return {
            "format": EVIDENCE_FORMAT,
            "user_id": self.user_id,
            "scheme": self.scheme,
            "hashing_mode": self.hashing_mode,
            "message": self.message,
            "timestamp": self.timestamp,
            "keycode": self.keycode,
            "public_key": self.public_key,
            "images": [
                {"name": img.name, "sha256": img.sha256, "data": encode64(img.data)}
                for img in self.images
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "EvidenceBundle":
        try:
            images = []
            for i, entry in enumerate(d.get("images", [])):
                name = _safe_name(entry.get("name", ""), f"image-{i}.png")
                images.append(ImageEvidence(name=name, data=decode64(entry["data"])))
            ts = d.get("timestamp")
            return cls(
                user_id=d["user_id"],
                scheme=d["scheme"],
                hashing_mode=d.get("hashing_mode", HASHING_HASHED),
                message=d["message"],
                timestamp=None if ts is None else int(ts),
                keycode=d["keycode"],
                public_key=d["public_key"],
                images=tuple(images),
            )
        except EncodingError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise EncodingError(f"malformed evidence bundle: {exc}") from exc

    def write_dir(self, path: str | Path) -> Path:
        """Write the bundle as a directory: ``evidence.json`` plus one PNG
        file per image, referenced by file name."""
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        doc = self.to_json_dict()
        doc["images"] = []
        for i, img in enumerate(self.images):
            name = _safe_name(img.name, f"image-{i}.png")
            (root / name).write_bytes(img.data)
            doc["images"].append(
                {"name": name, "sha256": img.sha256, "file": name}
            )
        (root / EVIDENCE_FILENAME).write_text(
            json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        return root

    @classmethod
    def read_dir(cls, path: str | Path) -> "EvidenceBundle":
        root = Path(path)
        doc_path = root / EVIDENCE_FILENAME
        if root.is_file():  # accept the json file itself as the bundle path
            doc_path, root = root, root.parent
        try:
            doc = json.loads(doc_path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise
        except (OSError, json.JSONDecodeError) as exc:
            raise EncodingError(f"unreadable evidence bundle: {exc}") from exc
        images = []
        for i, entry in enumerate(doc.get("images", [])):
            name = _safe_name(entry.get("name", ""), f"image-{i}.png")
            if "data" in entry:
                data = decode64(entry["data"])
            else:
                data = (root / _safe_name(entry["file"], name)).read_bytes()
            images.append({"name": name, "data": encode64(data)})
        doc["images"] = images
        return cls.from_json_dict(doc)
