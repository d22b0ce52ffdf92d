"""Command-line front door for account owners and verifiers.

Exit codes are a stable scripting contract: 0 means done (for ``verify``:
verdict true), 1 means verification failed, 2 means usage or IO error.
``verify`` runs fully offline from an evidence bundle directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import crypto, protocol
from .errors import PostsealError
from .models import (
    CUSTODY_MODES,
    CUSTODY_TTP,
    HASHING_MODES,
    SCHEME_PROVABLE,
    SCHEME_TEXT,
    SCHEMES,
    EvidenceBundle,
    VerificationResult,
)
from .store import Store

PRIVATE_KEY_FILE = "private_key.pem"
PUBLIC_KEY_FILE = "public_key.txt"

_SETTABLE_FIELDS = {
    "message": str,
    "timestamp": int,
    "keycode": str,
    "public_key": str,
    "user_id": str,
    "scheme": str,
    "hashing_mode": str,
}


def cmd_keygen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    private_path = out / PRIVATE_KEY_FILE
    public_path = out / PUBLIC_KEY_FILE
    for path in (private_path, public_path):
        if path.exists() and not args.force:
            print(f"error: {path} exists; pass --force to overwrite", file=sys.stderr)
            return 2
    pair = crypto.generate_keypair(args.bits)
    private_path.write_bytes(crypto.export_private_key_pem(pair.private_key))
    private_path.chmod(0o600)
    public_path.write_text(crypto.export_public_key(pair.public_key) + "\n")
    print(f"private key: {private_path}")
    print(f"public key:  {public_path}")
    return 0


def _load_keypair(path: str) -> crypto.KeyPair:
    return crypto.KeyPair(crypto.load_private_key_pem(Path(path).read_bytes()))


def cmd_register(args) -> int:
    store = Store(args.store)
    keypair = _load_keypair(args.key) if args.key else None
    public_key = None
    if args.pubkey:
        public_key = Path(args.pubkey).read_text().strip()
    registration = protocol.register(
        store,
        args.user,
        custody=args.custody,
        keypair=keypair,
        public_key=public_key,
        modulus_bits=args.bits,
    )
    print(f"registered: {registration.account.user_id} ({args.custody})")
    print(f"public key: {registration.account.public_key}")
    print(f"token: {registration.token}")
    if registration.private_key_pem is not None and args.custody == CUSTODY_TTP:
        print("private key: held by the store")
    return 0


def cmd_post(args) -> int:
    store = Store(args.store)
    account = store.require_account(args.user)
    private_key = None
    if account.custody != CUSTODY_TTP:
        if not args.key:
            print(
                f"error: account {args.user!r} is client-held; pass --key",
                file=sys.stderr,
            )
            return 2
        private_key = _load_keypair(args.key).private_key
    images = [Path(p).read_bytes() for p in args.image]
    scheme = args.scheme
    if scheme is None:
        scheme = SCHEME_PROVABLE if images else SCHEME_TEXT
    record = protocol.create_post(
        store,
        args.user,
        scheme,
        args.message,
        images=images,
        timestamp=args.timestamp,
        hashing_mode=args.hashing_mode,
        private_key=private_key,
    )
    bundle = store.get_evidence(record.post_id)
    evidence_dir = bundle.write_dir(store.root / "evidence" / record.post_id)
    print(f"post: {record.post_id}")
    print(f"keycode: {record.keycode}")
    print(f"evidence: {evidence_dir}")
    return 0


def cmd_search(args) -> int:
    store = Store(args.store)
    records = store.search(
        user_id=args.user, ts_from=args.ts_from, ts_to=args.ts_to, text=args.q
    )
    if args.json:
        print(json.dumps([r.to_json_dict() for r in records], ensure_ascii=False))
        return 0
    for r in records:
        message = r.message.replace("\t", " ").replace("\n", " ")
        print(
            "\t".join(
                [r.post_id, r.user_id, r.scheme, str(r.timestamp), r.status, message]
            )
        )
    return 0


def cmd_evidence(args) -> int:
    store = Store(args.store)
    bundle = store.get_evidence(args.post)
    out = bundle.write_dir(args.out)
    print(f"evidence: {out}")
    return 0


def cmd_withdraw(args) -> int:
    store = Store(args.store)
    store.withdraw(args.post)
    print(f"withdrawn: {args.post}")
    return 0


def _apply_overrides(bundle: EvidenceBundle, overrides: list[str]) -> EvidenceBundle:
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or key not in _SETTABLE_FIELDS:
            raise PostsealError(
                f"--set expects field=value with field one of "
                f"{sorted(_SETTABLE_FIELDS)}, got {item!r}"
            )
        bundle = dataclasses.replace(bundle, **{key: _SETTABLE_FIELDS[key](value)})
    return bundle


def _print_result(result: VerificationResult, as_json: bool) -> None:
    if as_json:
        print(json.dumps(result.to_json_dict(), ensure_ascii=False))
        return
    width = max((len(c.name) for c in result.checks), default=0)
    for check in result.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{check.name.ljust(width)}  {status}  {check.detail}")
    print(f"verdict: {'VERIFIED' if result.verdict else 'FAILED'}")


def cmd_verify(args) -> int:
    bundle = EvidenceBundle.read_dir(args.bundle)
    bundle = _apply_overrides(bundle, args.set)
    result = protocol.verify_bundle(bundle)
    _print_result(result, args.json)
    return 0 if result.verdict else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import OutboxPublisher, create_app

    if args.ui and not Path(args.ui).is_dir():
        print(f"error: UI directory {args.ui!r} does not exist", file=sys.stderr)
        return 2
    publisher = OutboxPublisher(args.outbox) if args.outbox else None
    app = create_app(Store(args.store), publisher=publisher, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="postseal",
        description="Sign micro-blog posts into verifiable key-codes, bind "
        "images to them with watermarks, and verify evidence bundles offline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate an RSA key pair")
    p.add_argument("--bits", type=int, default=crypto.DEFAULT_MODULUS_BITS)
    p.add_argument("--out", default=".", help="directory for the key files")
    p.add_argument("--force", action="store_true", help="overwrite existing files")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("register", help="register an account in a store")
    p.add_argument("--store", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--custody", choices=CUSTODY_MODES, default=CUSTODY_TTP)
    p.add_argument("--key", help="existing private key PEM to register with")
    p.add_argument("--pubkey", help="public key file (client-held custody)")
    p.add_argument("--bits", type=int, default=crypto.DEFAULT_MODULUS_BITS)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("post", help="compose, sign and persist a post")
    p.add_argument("--store", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--message", required=True)
    p.add_argument("--image", action="append", default=[], help="attach a PNG file")
    p.add_argument(
        "--scheme",
        choices=SCHEMES,
        default=None,
        help="default: text without images, pictured-provable with",
    )
    p.add_argument("--timestamp", type=int, default=None)
    p.add_argument("--hashing-mode", choices=HASHING_MODES, default="hashed")
    p.add_argument("--key", help="private key PEM (client-held custody)")
    p.set_defaults(func=cmd_post)

    p = sub.add_parser("search", help="search stored posts")
    p.add_argument("--store", required=True)
    p.add_argument("--user", default=None)
    p.add_argument("--from", dest="ts_from", type=int, default=None)
    p.add_argument("--to", dest="ts_to", type=int, default=None)
    p.add_argument("--q", default=None, help="message substring")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evidence", help="export a post's evidence bundle")
    p.add_argument("--store", required=True)
    p.add_argument("--post", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evidence)

    p = sub.add_parser("withdraw", help="mark a post withdrawn (evidence kept)")
    p.add_argument("--store", required=True)
    p.add_argument("--post", required=True)
    p.set_defaults(func=cmd_withdraw)

    p = sub.add_parser("verify", help="verify an evidence bundle offline")
    p.add_argument("--bundle", required=True, help="bundle directory or json file")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="FIELD=VALUE",
        help="override a bundle field before verifying (what-if checks)",
    )
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8470)
    p.add_argument("--outbox", default=None, help="publisher outbox file")
    p.add_argument("--ui", default=None, help="serve a built web UI directory at /ui")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse has already printed its message
        return int(exc.code or 0)
    try:
        return args.func(args)
    except PostsealError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
