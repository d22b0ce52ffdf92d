"""Durable, append-only persistence for accounts and post records.

Single-directory layout, auditable with nothing but a text editor:

    accounts.jsonl   one line per registration
    posts.jsonl      append-only event log: "post" and "withdraw" lines
    keys/<user>.pem  private keys held in trust (ttp-held custody only)
    images/<sha>.png stamped images, content-addressed by their byte digest

Image files hold the normative stamped PNG bytes; image signature segments
cover exactly these bytes. Withdrawal appends an event and never rewrites
or deletes anything, so evidence for a withdrawn post keeps verifying.

One writer at a time (a file lock serializes appends); readers scan freely.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

from filelock import FileLock

from . import crypto
from .errors import ConflictError, NotFoundError, UnknownAccountError
from .models import (
    SCHEME_PROVABLE,
    Account,
    EvidenceBundle,
    ImageEvidence,
    PostRecord,
    sha256_hex,
)

_ACCOUNTS = "accounts.jsonl"
_POSTS = "posts.jsonl"
_KEYS = "keys"
_IMAGES = "images"
_LOCK = ".lock"


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError:
                continue  # torn trailing line from an interrupted writer
    return rows


class Store:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / _KEYS).mkdir(exist_ok=True)
        (self.root / _IMAGES).mkdir(exist_ok=True)
        self._lock = FileLock(str(self.root / _LOCK))

    # -- accounts -----------------------------------------------------------

    def _accounts(self) -> dict[str, dict]:
        return {row["user_id"]: row for row in _read_jsonl(self.root / _ACCOUNTS)}

    def put_account(
        self,
        account: Account,
        token_hash: str | None = None,
        private_key_pem: bytes | None = None,
    ) -> None:
        with self._lock:
            if account.user_id in self._accounts():
                raise ConflictError(f"user_id {account.user_id!r} already registered")
            row = account.to_json_dict()
            if token_hash:
                row["token_sha256"] = token_hash
            if private_key_pem is not None:
                key_path = self.root / _KEYS / f"{account.user_id}.pem"
                key_path.write_bytes(private_key_pem)
                os.chmod(key_path, 0o600)
            with (self.root / _ACCOUNTS).open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    def get_account(self, user_id: str) -> Account | None:
        row = self._accounts().get(user_id)
        return Account.from_json_dict(row) if row else None

    def require_account(self, user_id: str) -> Account:
        account = self.get_account(user_id)
        if account is None:
            raise UnknownAccountError(f"no account {user_id!r}")
        return account

    def token_hash(self, user_id: str) -> str | None:
        row = self._accounts().get(user_id)
        return row.get("token_sha256") if row else None

    def check_token(self, user_id: str, token: str) -> bool:
        expected = self.token_hash(user_id)
        return expected is not None and sha256_hex(token.encode("ascii")) == expected

    def load_private_key(self, user_id: str):
        key_path = self.root / _KEYS / f"{user_id}.pem"
        if not key_path.exists():
            raise NotFoundError(f"no private key held for {user_id!r}")
        return crypto.load_private_key_pem(key_path.read_bytes())

    # -- posts --------------------------------------------------------------

    def _records(self) -> dict[str, PostRecord]:
        records: dict[str, PostRecord] = {}
        for row in _read_jsonl(self.root / _POSTS):
            event = row.get("event")
            if event == "post":
                record = PostRecord.from_json_dict(row["record"])
                records[record.post_id] = record
            elif event == "withdraw":
                post_id = row.get("post_id")
                if post_id in records:
                    existing = records[post_id]
                    records[post_id] = PostRecord.from_json_dict(
                        {**existing.to_json_dict(), "status": "withdrawn"}
                    )
        return records

    def put_post(
        self, record: PostRecord, images: list[tuple[str, bytes]] = ()
    ) -> str:
        """Persist a record and its stamped image bytes; returns the post id.

        The account must exist and the content-addressed post id must be new.
        """
        with self._lock:
            if record.user_id not in self._accounts():
                raise UnknownAccountError(f"no account {record.user_id!r}")
            if record.post_id in self._records():
                raise ConflictError(
                    f"post {record.post_id} already exists (identical key-code)"
                )
            by_name = {ref.name: ref for ref in record.images}
            for name, data in images:
                ref = by_name.get(name)
                digest = sha256_hex(data)
                if ref is None or ref.sha256 != digest:
                    raise ConflictError(
                        f"image {name!r} does not match the record's references"
                    )
                (self.root / _IMAGES / f"{digest}.png").write_bytes(data)
            line = {"event": "post", "record": record.to_json_dict()}
            with (self.root / _POSTS).open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(line, ensure_ascii=False) + "\n")
        return record.post_id

    def get_post(self, post_id: str) -> PostRecord | None:
        return self._records().get(post_id)

    def require_post(self, post_id: str) -> PostRecord:
        record = self.get_post(post_id)
        if record is None:
            raise NotFoundError(f"no post {post_id!r}")
        return record

    def search(
        self,
        user_id: str | None = None,
        ts_from: int | None = None,
        ts_to: int | None = None,
        text: str | None = None,
    ) -> list[PostRecord]:
        """Conjunctive filter over all records, newest first.

        ``ts_from``/``ts_to`` are inclusive bounds on the record timestamp;
        ``text`` is a plain substring match on the message.
        """
        ordered = list(self._records().values())
        hits = []
        for record in ordered:
            if user_id is not None and record.user_id != user_id:
                continue
            if ts_from is not None and record.timestamp < ts_from:
                continue
            if ts_to is not None and record.timestamp > ts_to:
                continue
            if text is not None and text not in record.message:
                continue
            hits.append(record)
        order = {r.post_id: i for i, r in enumerate(ordered)}
        hits.sort(key=lambda r: (r.timestamp, order[r.post_id]), reverse=True)
        return hits

    def withdraw(self, post_id: str) -> None:
        """Mark a post withdrawn. Idempotent; the original log line survives."""
        with self._lock:
            record = self._records().get(post_id)
            if record is None:
                raise NotFoundError(f"no post {post_id!r}")
            if record.status == "withdrawn":
                return
            line = {"event": "withdraw", "post_id": post_id, "at": int(time.time())}
            with (self.root / _POSTS).open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(line) + "\n")

    def last_timestamp(self, user_id: str) -> int | None:
        stamps = [
            r.timestamp for r in self._records().values() if r.user_id == user_id
        ]
        return max(stamps) if stamps else None

    # -- evidence -----------------------------------------------------------

    def image_bytes(self, sha256: str) -> bytes:
        path = self.root / _IMAGES / f"{sha256}.png"
        if not path.exists():
            raise NotFoundError(f"no stored image {sha256}")
        return path.read_bytes()

    def get_evidence(self, post_id: str) -> EvidenceBundle:
        """Self-contained evidence for a post, withdrawn or not."""
        record = self.require_post(post_id)
        account = self.require_account(record.user_id)
        images = tuple(
            ImageEvidence(name=ref.name, data=self.image_bytes(ref.sha256))
            for ref in record.images
        )
        return EvidenceBundle(
            user_id=record.user_id,
            scheme=record.scheme,
            hashing_mode=record.hashing_mode,
            message=record.message,
            timestamp=record.timestamp if record.scheme == SCHEME_PROVABLE else None,
            keycode=record.keycode,
            public_key=account.public_key,
            images=images,
        )
