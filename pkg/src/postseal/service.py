"""HTTP service: registration, posting, search, evidence and verification.

The service plays the trusted-party role for ttp-held accounts (it signs
with the key it holds) and runs a detached-signature flow for client-held
accounts: it returns the exact bytes to sign, the client answers with
signature segments, and the server validates them before persisting.

Publishing to the outside micro-blog is pluggable and local-first: the post
record is durably stored before the publisher runs, so a publisher failure
never loses evidence.
"""

from __future__ import annotations

import json
import secrets
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import crypto, pngio, protocol, watermark
from .errors import (
    CapacityError,
    ClockError,
    ConfigurationError,
    ConflictError,
    EncodingError,
    ModeError,
    NotFoundError,
    PostsealError,
    UnknownAccountError,
)
from .models import (
    CUSTODY_CLIENT,
    CUSTODY_MODES,
    HASHING_DIRECT,
    HASHING_HASHED,
    SCHEME_PROVABLE,
    SCHEME_TEXT,
    SCHEMES,
    EvidenceBundle,
    ImageRef,
    KeyCode,
    PostRecord,
    sha256_hex,
)
from .store import Store


class PublisherClient(Protocol):
    """Forwards a finished post to the external micro-blog service."""

    def publish(
        self, user_id: str, message: str, keycode: str, image_refs: list[str]
    ) -> str:
        """Returns an external post reference."""
        ...


class OutboxPublisher:
    """Default publisher: appends outgoing posts to a local outbox file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def publish(
        self, user_id: str, message: str, keycode: str, image_refs: list[str]
    ) -> str:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "at": int(time.time()),
            "user_id": user_id,
            "message": message,
            "keycode": keycode,
            "images": image_refs,
        }
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        with self.path.open("r", encoding="utf-8") as fh:
            line_no = sum(1 for _ in fh)
        return f"outbox:{line_no}"


@dataclass
class PendingPost:
    """Server-side state of a client-held detached signature flow."""

    pending_id: str
    user_id: str
    scheme: str
    message: str
    hashing_mode: str
    timestamp: int
    covers: list[bytes]
    to_sign: list[dict]
    segments: list[bytes] = field(default_factory=list)
    stamped: list[bytes] = field(default_factory=list)


_STATUS = {
    UnknownAccountError: 404,
    NotFoundError: 404,
    ConflictError: 409,
    ClockError: 409,
    CapacityError: 422,
    ModeError: 422,
    ConfigurationError: 400,
    EncodingError: 400,
}


def _error_response(exc: PostsealError) -> JSONResponse:
    status = _STATUS.get(type(exc), 400)
    body = {"detail": str(exc)}
    if isinstance(exc, CapacityError) and exc.image_index is not None:
        body["image_index"] = exc.image_index
    return JSONResponse(status_code=status, content=body)


def _as_int(value, label: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{label} must be an integer") from None


async def _read_json_object(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception as exc:
        raise EncodingError(f"request body is not JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise EncodingError("expected a JSON object")
    return body


def create_app(
    store: Store | str | Path,
    publisher: PublisherClient | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    if not isinstance(store, Store):
        store = Store(store)
    if publisher is None:
        publisher = OutboxPublisher(store.root / "outbox.jsonl")

    app = FastAPI(title="postseal", version="0.1.0")
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")
    app.state.store = store
    app.state.publisher = publisher
    app.state.pending = {}

    for exc_type in _STATUS:
        app.add_exception_handler(exc_type, lambda _req, exc: _error_response(exc))

    # -- helpers ------------------------------------------------------------

    def _authed_user(request: Request, user_id: str) -> None:
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip()
        if not token or not store.check_token(user_id, token):
            raise PermissionError(user_id)

    def _publish(record: PostRecord) -> dict:
        refs = [ref.sha256 for ref in record.images]
        try:
            ref = publisher.publish(record.user_id, record.message, record.keycode, refs)
            return {"publish_ref": ref, "publish_error": None}
        except Exception as exc:  # local record already persisted
            return {"publish_ref": None, "publish_error": str(exc)}

    def _post_response(record: PostRecord, publish: dict) -> JSONResponse:
        return JSONResponse(
            status_code=201,
            content={
                "post": record.to_json_dict(),
                "keycode": record.keycode,
                "evidence_url": f"/posts/{record.post_id}/evidence",
                **publish,
            },
        )

    @app.exception_handler(PermissionError)
    async def _unauthorized(_req, exc):
        return JSONResponse(
            status_code=401, content={"detail": f"invalid token for {exc}"}
        )

    # -- accounts -----------------------------------------------------------

    @app.post("/accounts", status_code=201)
    async def create_account(request: Request):
        body = await _read_json_object(request)
        user_id = body.get("user_id")
        custody = body.get("custody", "ttp-held")
        if not user_id or custody not in CUSTODY_MODES:
            raise ConfigurationError("user_id and a valid custody mode are required")
        if custody == CUSTODY_CLIENT and not body.get("public_key"):
            raise ConfigurationError("client-held custody requires public_key")
        registration = protocol.register(
            store,
            user_id,
            custody=custody,
            public_key=body.get("public_key"),
            modulus_bits=_as_int(
                body.get("bits", crypto.DEFAULT_MODULUS_BITS), "bits"
            ),
        )
        payload = registration.account.to_json_dict()
        payload["token"] = registration.token
        if registration.private_key_pem is not None:
            # one-time receipt; the key stays with the service afterwards
            payload["private_key"] = registration.private_key_pem.decode("ascii")
        return JSONResponse(status_code=201, content=payload)

    @app.get("/accounts/{user_id}")
    async def get_account(user_id: str):
        return store.require_account(user_id).to_json_dict()

    # -- posting ------------------------------------------------------------

    async def _read_post_request(request: Request) -> tuple[dict, list[bytes]]:
        ctype = request.headers.get("content-type", "")
        if ctype.startswith("multipart/form-data"):
            form = await request.form()
            fields = {
                key: value
                for key, value in form.multi_items()
                if isinstance(value, str)
            }
            images = []
            for key, value in form.multi_items():
                if key == "images" and not isinstance(value, str):
                    images.append(await value.read())
            return fields, images
        body = await _read_json_object(request)
        entries = body.get("images", [])
        if not isinstance(entries, list):
            raise EncodingError("images must be a list of base64url strings")
        images = [crypto.decode64(entry) for entry in entries]
        return body, images

    @app.post("/posts")
    async def create_post(request: Request):
        fields, images = await _read_post_request(request)
        user_id = fields.get("user_id")
        if not user_id:
            raise ConfigurationError("user_id is required")
        _authed_user(request, user_id)
        scheme = fields.get("scheme", SCHEME_TEXT)
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {scheme!r}")
        message = fields.get("message")
        if message is None:
            raise ConfigurationError("message is required")
        hashing_mode = fields.get("hashing_mode", HASHING_HASHED)
        timestamp = fields.get("timestamp")
        timestamp = None if timestamp in (None, "") else _as_int(timestamp, "timestamp")

        account = store.require_account(user_id)
        if account.custody == CUSTODY_CLIENT:
            return _start_pending(
                account.public_key, user_id, scheme, message, hashing_mode, timestamp, images
            )

        record = protocol.create_post(
            store,
            user_id,
            scheme,
            message,
            images=images,
            timestamp=timestamp,
            hashing_mode=hashing_mode,
        )
        return _post_response(record, _publish(record))

    def _sign_request(name: str, algorithm: str, data: bytes) -> dict:
        return {"name": name, "algorithm": algorithm, "data": crypto.encode64(data)}

    def _start_pending(
        public_key: str,
        user_id: str,
        scheme: str,
        message: str,
        hashing_mode: str,
        timestamp: int | None,
        images: list[bytes],
    ) -> JSONResponse:
        if hashing_mode == HASHING_DIRECT and scheme != SCHEME_TEXT:
            raise ConfigurationError("direct mode applies to text posts only")
        if scheme != SCHEME_TEXT and not images:
            raise ConfigurationError("a pictured post needs at least one image")
        if scheme == SCHEME_TEXT and images:
            raise ConfigurationError("text posts cannot carry images")
        record_ts = int(time.time()) if timestamp is None else timestamp
        last = store.last_timestamp(user_id)
        if last is not None and record_ts < last:
            raise ClockError(
                f"timestamp {record_ts} precedes the account's last post "
                f"timestamp {last}"
            )
        # Fail capacity before asking the client to sign anything.
        if scheme != SCHEME_TEXT:
            need = crypto.segment_size(crypto.load_public_key(public_key))
            for i, data in enumerate(images):
                room = watermark.capacity(pngio.decode_png(data))
                if need > room:
                    raise CapacityError(required=need, available=room, image_index=i)

        if scheme == SCHEME_PROVABLE:
            to_sign_bytes = crypto.digest(protocol.canonicalize(message, record_ts))
            algorithm = "digest"
        elif hashing_mode == HASHING_DIRECT:
            to_sign_bytes = message.encode("utf-8")
            algorithm = "direct"
            key = crypto.load_public_key(public_key)
            if len(to_sign_bytes) > crypto.max_direct_bytes(key):
                raise ModeError(
                    "message too long for direct mode; use hashed mode"
                )
        else:
            to_sign_bytes = crypto.digest(protocol.canonicalize(message))
            algorithm = "digest"

        pending = PendingPost(
            pending_id=secrets.token_urlsafe(16),
            user_id=user_id,
            scheme=scheme,
            message=message,
            hashing_mode=hashing_mode,
            timestamp=record_ts,
            covers=images,
            to_sign=[_sign_request("segment-1", algorithm, to_sign_bytes)],
        )
        app.state.pending[pending.pending_id] = pending
        return JSONResponse(
            status_code=202,
            content={"pending_id": pending.pending_id, "to_sign": pending.to_sign},
        )

    @app.post("/posts/pending/{pending_id}")
    async def submit_segments(pending_id: str, request: Request):
        pending: PendingPost | None = app.state.pending.get(pending_id)
        if pending is None:
            raise NotFoundError(f"no pending post {pending_id!r}")
        _authed_user(request, pending.user_id)
        body = await _read_json_object(request)
        entries = body.get("segments", [])
        if not isinstance(entries, list):
            raise EncodingError("segments must be a list of base64url strings")
        submitted = [crypto.decode64(s) for s in entries]
        if len(submitted) != len(pending.to_sign):
            raise ConfigurationError(
                f"expected {len(pending.to_sign)} segment(s), got {len(submitted)}"
            )
        public_key = crypto.load_public_key(
            store.require_account(pending.user_id).public_key
        )
        for ask, segment in zip(pending.to_sign, submitted):
            data = crypto.decode64(ask["data"])
            if ask["algorithm"] == "direct":
                ok = crypto.verify_direct(data, segment, public_key)
            else:
                ok = crypto.verify_segment(data, segment, public_key)
            if not ok:
                raise ConfigurationError(
                    f"segment {ask['name']} does not verify under the account key"
                )
        pending.segments.extend(submitted)

        if pending.scheme != SCHEME_TEXT and not pending.stamped:
            pending.stamped = list(protocol.stamp_images(pending.segments[0], pending.covers))
            if pending.scheme == SCHEME_PROVABLE:
                pending.to_sign = [
                    _sign_request(f"segment-{i + 2}", "digest", crypto.digest(png))
                    for i, png in enumerate(pending.stamped)
                ]
                return JSONResponse(
                    status_code=202,
                    content={
                        "pending_id": pending.pending_id,
                        "to_sign": pending.to_sign,
                    },
                )

        del app.state.pending[pending.pending_id]
        return _finalize_pending(pending)

    def _finalize_pending(pending: PendingPost) -> JSONResponse:
        rendered = KeyCode(tuple(pending.segments)).render()
        named = [(f"image-{i}.png", data) for i, data in enumerate(pending.stamped)]
        record = PostRecord(
            post_id=protocol.make_post_id(rendered),
            user_id=pending.user_id,
            scheme=pending.scheme,
            message=pending.message,
            timestamp=pending.timestamp,
            keycode=rendered,
            images=tuple(
                ImageRef(name=n, sha256=sha256_hex(d)) for n, d in named
            ),
            hashing_mode=pending.hashing_mode,
        )
        store.put_post(record, named)
        return _post_response(record, _publish(record))

    # -- search, evidence, withdrawal ----------------------------------------

    @app.get("/posts")
    async def search_posts(
        request: Request,
        user: str | None = None,
        q: str | None = None,
    ):
        params = request.query_params
        ts_from = params.get("from")
        ts_to = params.get("to")
        records = store.search(
            user_id=user,
            ts_from=None if ts_from in (None, "") else _as_int(ts_from, "from"),
            ts_to=None if ts_to in (None, "") else _as_int(ts_to, "to"),
            text=q,
        )
        return {"results": [r.to_json_dict() for r in records]}

    @app.get("/posts/{post_id}")
    async def get_post(post_id: str):
        return store.require_post(post_id).to_json_dict()

    @app.get("/posts/{post_id}/evidence")
    async def get_evidence(post_id: str):
        return store.get_evidence(post_id).to_json_dict()

    @app.post("/posts/{post_id}/withdraw")
    async def withdraw_post(post_id: str, request: Request):
        record = store.require_post(post_id)
        _authed_user(request, record.user_id)
        store.withdraw(post_id)
        return {"post_id": post_id, "status": "withdrawn"}

    # -- verification ---------------------------------------------------------

    @app.post("/verify")
    async def verify(request: Request):
        bundle = EvidenceBundle.from_json_dict(await _read_json_object(request))
        return protocol.verify_bundle(bundle).to_json_dict()

    return app
