from __future__ import annotations

import io
import os

import numpy as np
import pytest
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from postseal import crypto, pngio, protocol, watermark
from postseal.errors import (
    CapacityError,
    ClockError,
    ConfigurationError,
    ConflictError,
    ModeError,
)
from postseal.models import (
    CUSTODY_CLIENT,
    CUSTODY_TTP,
    SCHEME_PROVABLE,
    SCHEME_SIMPLE,
    SCHEME_TEXT,
    EvidenceBundle,
    ImageEvidence,
    KeyCode,
)
from postseal.store import Store


def failed_names(result):
    return [c.name for c in result.checks if not c.passed]


class TestCanonicalize:
    def test_plain_message_is_identity(self):
        assert protocol.canonicalize("hi") == b"\x68\x69"

    def test_timestamp_appended_after_separator(self):
        assert protocol.canonicalize("hi", 1700000000) == b"hi\x1f1700000000"

    def test_reserved_separator_rejected(self):
        # "a\x1f1" as a plain message would alias ("a", t=1); it is refused
        # outright, so the two can never produce the same bytes.
        with pytest.raises(ValueError):
            protocol.canonicalize("a\x1f1")
        assert protocol.canonicalize("a", 1) == b"a\x1f1"

    def test_negative_timestamp_rejected(self):
        with pytest.raises(ValueError):
            protocol.canonicalize("m", -5)

    def test_injective_over_random_pairs(self, rng):
        seen = {}
        for _ in range(300):
            message = "".join(
                chr(c) for c in rng.integers(32, 127, size=rng.integers(0, 20))
            )
            ts = int(rng.integers(0, 2**31)) if rng.random() < 0.7 else None
            blob = protocol.canonicalize(message, ts)
            assert seen.setdefault(blob, (message, ts)) == (message, ts)


class TestTextPosts:
    def test_hashed_roundtrip(self, keypair):
        post = protocol.compose_text_post("hello", keypair.private_key)
        assert len(post.keycode.segments) == 1
        assert len(post.keycode.segments[0]) == 256
        result = protocol.verify_text_post(
            "hello", post.keycode, keypair.public_key
        )
        assert result.verdict

    def test_rendered_keycode_verifies(self, keypair):
        post = protocol.compose_text_post("hello", keypair.private_key)
        rendered = post.keycode.render()
        assert protocol.verify_text_post(
            "hello", rendered, keypair.public_key
        ).verdict

    def test_tampered_message_fails(self, keypair):
        post = protocol.compose_text_post("hello", keypair.private_key)
        result = protocol.verify_text_post("hellp", post.keycode, keypair.public_key)
        assert not result.verdict
        assert failed_names(result) == ["keycode-segment-1"]

    def test_keycode_from_other_post_fails(self, keypair):
        one = protocol.compose_text_post("first", keypair.private_key)
        two = protocol.compose_text_post("second", keypair.private_key)
        assert not protocol.verify_text_post(
            "first", two.keycode, keypair.public_key
        ).verdict
        assert not protocol.verify_text_post(
            "second", one.keycode, keypair.public_key
        ).verdict

    def test_other_accounts_key_fails(self, keypair, other_keypair):
        post = protocol.compose_text_post("mine", keypair.private_key)
        assert not protocol.verify_text_post(
            "mine", post.keycode, other_keypair.public_key
        ).verdict

    def test_malformed_keycode_is_parse_failure(self, keypair):
        result = protocol.verify_text_post("m", "!!not base64!!", keypair.public_key)
        assert not result.verdict
        assert failed_names(result) == ["keycode-parse"]

    def test_wrong_segment_count_is_structure_failure(self, keypair):
        seg = protocol.compose_text_post("m", keypair.private_key).keycode.segments[0]
        two = KeyCode((seg, seg))
        result = protocol.verify_text_post("m", two, keypair.public_key)
        assert not result.verdict
        assert "structure" in failed_names(result)

    def test_reserved_character_fails_verification(self, keypair):
        # segment-1 of a timestamped post must not alias a plain text post
        provable_first = crypto.sign_digest(
            crypto.digest(protocol.canonicalize("a", 1)), keypair.private_key
        )
        result = protocol.verify_text_post(
            "a\x1f1", KeyCode((provable_first,)), keypair.public_key
        )
        assert not result.verdict
        assert "message" in failed_names(result)

    def test_direct_mode_roundtrip(self, keypair):
        post = protocol.compose_text_post(
            "short and checkable", keypair.private_key, hashing_mode="direct"
        )
        assert protocol.verify_text_post(
            "short and checkable", post.keycode, keypair.public_key, "direct"
        ).verdict
        # a direct keycode is not a hashed keycode
        assert not protocol.verify_text_post(
            "short and checkable", post.keycode, keypair.public_key, "hashed"
        ).verdict

    def test_direct_mode_oversize_message(self, keypair):
        with pytest.raises(ModeError) as exc:
            protocol.compose_text_post(
                "x" * 300, keypair.private_key, hashing_mode="direct"
            )
        assert "hashed" in str(exc.value)

    def test_unknown_mode_rejected(self, keypair):
        with pytest.raises(ConfigurationError):
            protocol.compose_text_post("m", keypair.private_key, hashing_mode="plain")

    def test_message_length_limit(self, keypair):
        with pytest.raises(ConfigurationError):
            protocol.compose_text_post("x" * 5000, keypair.private_key)
        protocol.compose_text_post(
            "x" * 5000, keypair.private_key, max_message_bytes=8192
        )


class TestSimplePicturedPosts:
    def test_single_image(self, keypair, image_factory):
        img = image_factory(64, 64)
        post = protocol.compose_pictured_post_simple(
            "look", [img], keypair.private_key
        )
        assert len(post.keycode.segments) == 1
        segment = post.keycode.segments[0]
        assert watermark.detect(pngio.decode_png(post.images[0]), segment)
        result = protocol.verify_pictured_post_simple(
            "look", post.keycode, list(post.images), keypair.public_key
        )
        assert result.verdict

    def test_three_images_same_payload(self, keypair, image_factory):
        imgs = [image_factory(64, 64) for _ in range(3)]
        post = protocol.compose_pictured_post_simple(
            "three", imgs, keypair.private_key
        )
        assert len(post.images) == 3
        segment = post.keycode.segments[0]
        for png in post.images:
            assert watermark.detect(pngio.decode_png(png), segment)

    def test_capacity_error_names_image(self, keypair, image_factory):
        big, tiny = image_factory(64, 64), image_factory(4, 4)
        with pytest.raises(CapacityError) as exc:
            protocol.compose_pictured_post_simple(
                "m", [tiny, big], keypair.private_key
            )
        assert exc.value.image_index == 0
        with pytest.raises(CapacityError) as exc:
            protocol.compose_pictured_post_simple(
                "m", [big, tiny], keypair.private_key
            )
        assert exc.value.image_index == 1

    def test_unstamped_image_fails_watermark_check(self, keypair, image_factory):
        post = protocol.compose_pictured_post_simple(
            "m", [image_factory(64, 64)], keypair.private_key
        )
        plain = pngio.encode_png(image_factory(64, 64))
        result = protocol.verify_pictured_post_simple(
            "m", post.keycode, [plain], keypair.public_key
        )
        assert not result.verdict
        assert failed_names(result) == ["watermark-image-0"]

    def test_known_limitation_identical_messages_mix(self, keypair, image_factory):
        # Two posts with the same text share a key-code, so swapping their
        # images verifies clean. The provable scheme exists to close this.
        post1 = protocol.compose_pictured_post_simple(
            "same words", [image_factory(64, 64)], keypair.private_key
        )
        post2 = protocol.compose_pictured_post_simple(
            "same words", [image_factory(64, 64)], keypair.private_key
        )
        assert post1.keycode == post2.keycode
        hoax = protocol.verify_pictured_post_simple(
            "same words", post1.keycode, list(post2.images), keypair.public_key
        )
        assert hoax.verdict

    def test_needs_an_image(self, keypair):
        with pytest.raises(ConfigurationError):
            protocol.compose_pictured_post_simple("m", [], keypair.private_key)


class TestProvablePicturedPosts:
    def test_one_image_two_segments(self, keypair, image_factory):
        post = protocol.compose_pictured_post_provable(
            "msg", 1700000000, [image_factory(64, 64)], keypair.private_key
        )
        assert len(post.keycode.segments) == 2
        result = protocol.verify_pictured_post_provable(
            "msg", 1700000000, post.keycode, list(post.images), keypair.public_key
        )
        assert result.verdict
        assert [c.name for c in result.checks] == [
            "structure",
            "keycode-segment-1",
            "watermark-image-0",
            "keycode-segment-2",
        ]

    def test_two_images_three_segments(self, keypair, image_factory):
        post = protocol.compose_pictured_post_provable(
            "msg",
            1700000000,
            [image_factory(64, 64), image_factory(80, 48)],
            keypair.private_key,
        )
        assert len(post.keycode.segments) == 3

    def test_second_segment_signs_stamped_bytes(self, keypair, image_factory):
        post = protocol.compose_pictured_post_provable(
            "msg", 1700000000, [image_factory(64, 64)], keypair.private_key
        )
        assert crypto.verify_segment(
            crypto.digest(post.images[0]),
            post.keycode.segments[1],
            keypair.public_key,
        )

    def test_timestamp_changes_keycode(self, keypair, image_factory):
        img = image_factory(64, 64)
        one = protocol.compose_pictured_post_provable(
            "msg", 1700000000, [img], keypair.private_key
        )
        two = protocol.compose_pictured_post_provable(
            "msg", 1700000001, [img], keypair.private_key
        )
        assert one.keycode.segments[0] != two.keycode.segments[0]
        assert one.keycode.render() != two.keycode.render()

    def test_mixing_attack_detected(self, keypair, image_factory):
        message = "identical text"
        post1 = protocol.compose_pictured_post_provable(
            message, 1000, [image_factory(64, 64)], keypair.private_key
        )
        post2 = protocol.compose_pictured_post_provable(
            message, 2000, [image_factory(64, 64)], keypair.private_key
        )
        hoax = protocol.verify_pictured_post_provable(
            message, 1000, post1.keycode, list(post2.images), keypair.public_key
        )
        assert not hoax.verdict
        failed = failed_names(hoax)
        assert "watermark-image-0" in failed
        assert "keycode-segment-2" in failed
        # the honest pairings still verify
        assert protocol.verify_pictured_post_provable(
            message, 1000, post1.keycode, list(post1.images), keypair.public_key
        ).verdict
        assert protocol.verify_pictured_post_provable(
            message, 2000, post2.keycode, list(post2.images), keypair.public_key
        ).verdict

    def test_reencoded_image_keeps_watermark_fails_byte_digest(
        self, keypair, image_factory
    ):
        post = protocol.compose_pictured_post_provable(
            "msg", 1700000000, [image_factory(64, 64)], keypair.private_key
        )
        pixels = pngio.decode_png(post.images[0])
        meta = PngInfo()
        meta.add_text("comment", "recompressed copy")
        buf = io.BytesIO()
        Image.fromarray(pixels).save(buf, format="PNG", compress_level=9, pnginfo=meta)
        reencoded = buf.getvalue()
        assert reencoded != post.images[0]

        result = protocol.verify_pictured_post_provable(
            "msg", 1700000000, post.keycode, [reencoded], keypair.public_key
        )
        by_name = {c.name: c.passed for c in result.checks}
        assert by_name["keycode-segment-1"]
        assert by_name["watermark-image-0"]  # pixels survived
        assert not by_name["keycode-segment-2"]  # file bytes did not
        assert not result.verdict

    def test_segment_count_mismatch_is_structural(self, keypair, image_factory):
        post = protocol.compose_pictured_post_provable(
            "msg", 1700000000, [image_factory(64, 64)], keypair.private_key
        )
        short = KeyCode(post.keycode.segments[:1])
        result = protocol.verify_pictured_post_provable(
            "msg", 1700000000, short, list(post.images), keypair.public_key
        )
        assert not result.verdict
        assert failed_names(result) == ["structure"]

    def test_clock_guard(self, keypair, image_factory):
        with pytest.raises(ClockError):
            protocol.compose_pictured_post_provable(
                "msg",
                999,
                [image_factory(64, 64)],
                keypair.private_key,
                last_timestamp=1000,
            )
        # equal timestamps are allowed (non-decreasing, not strictly increasing)
        protocol.compose_pictured_post_provable(
            "msg", 1000, [image_factory(64, 64)], keypair.private_key,
            last_timestamp=1000,
        )


class TestEvidenceBundles:
    def _bundle(self, keypair, image_factory) -> EvidenceBundle:
        post = protocol.compose_pictured_post_provable(
            "bundled", 1700000000, [image_factory(64, 64)], keypair.private_key
        )
        return EvidenceBundle(
            user_id="alice",
            scheme=SCHEME_PROVABLE,
            message=post.message,
            timestamp=post.timestamp,
            keycode=post.keycode.render(),
            public_key=crypto.export_public_key(keypair.public_key),
            images=tuple(
                ImageEvidence(name=f"image-{i}.png", data=data)
                for i, data in enumerate(post.images)
            ),
        )

    def test_verify_bundle_roundtrip(self, keypair, image_factory):
        bundle = self._bundle(keypair, image_factory)
        assert protocol.verify_bundle(bundle).verdict

    def test_json_roundtrip(self, keypair, image_factory):
        bundle = self._bundle(keypair, image_factory)
        doc = bundle.to_json_dict()
        restored = EvidenceBundle.from_json_dict(doc)
        assert restored == bundle
        assert protocol.verify_bundle(restored).verdict

    def test_dir_roundtrip(self, tmp_path, keypair, image_factory):
        bundle = self._bundle(keypair, image_factory)
        bundle.write_dir(tmp_path / "evidence")
        restored = EvidenceBundle.read_dir(tmp_path / "evidence")
        assert restored == bundle

    def test_unknown_scheme_fails(self, keypair, image_factory):
        bundle = self._bundle(keypair, image_factory)
        import dataclasses

        odd = dataclasses.replace(bundle, scheme="carrier-pigeon")
        result = protocol.verify_bundle(odd)
        assert not result.verdict
        assert failed_names(result) == ["scheme"]

    def test_provable_without_timestamp_fails(self, keypair, image_factory):
        import dataclasses

        bundle = dataclasses.replace(
            self._bundle(keypair, image_factory), timestamp=None
        )
        result = protocol.verify_bundle(bundle)
        assert not result.verdict
        assert failed_names(result) == ["structure"]

    def test_garbage_public_key_fails_cleanly(self, keypair, image_factory):
        import dataclasses

        bundle = dataclasses.replace(
            self._bundle(keypair, image_factory),
            public_key=crypto.encode64(b"not a key"),
        )
        result = protocol.verify_bundle(bundle)
        assert not result.verdict
        assert failed_names(result) == ["public-key"]

    def test_stripped_images_fail_structurally(self, keypair, image_factory):
        # removing all image evidence must not degrade into a text check
        import dataclasses

        bundle = dataclasses.replace(
            self._bundle(keypair, image_factory), images=()
        )
        result = protocol.verify_bundle(bundle)
        assert not result.verdict
        assert failed_names(result) == ["structure"]

    def test_hostile_image_names_stay_inside_the_bundle_dir(
        self, tmp_path, keypair, image_factory
    ):
        import dataclasses
        import json

        bundle = self._bundle(keypair, image_factory)
        hostile = dataclasses.replace(
            bundle,
            images=(ImageEvidence(name="../escape.png", data=bundle.images[0].data),),
        )
        out = tmp_path / "bundle"
        hostile.write_dir(out)
        assert not (tmp_path / "escape.png").exists()
        assert (out / "escape.png").exists()

        # a crafted file reference must not read outside the directory either:
        # the traversal is stripped, and the in-dir name does not exist
        (tmp_path / "secret.bin").write_bytes(b"outside data")
        doc = json.loads((out / "evidence.json").read_text())
        doc["images"][0]["file"] = "../secret.bin"
        (out / "evidence.json").write_text(json.dumps(doc))
        with pytest.raises(FileNotFoundError):
            EvidenceBundle.read_dir(out)


class TestRegistration:
    def test_ttp_held_stores_key(self, tmp_path, keypair):
        store = Store(tmp_path)
        registration = protocol.register(
            store, "alice", custody=CUSTODY_TTP, keypair=keypair
        )
        assert registration.private_key_pem is not None
        assert store.load_private_key("alice") is not None
        assert registration.account.public_key == crypto.export_public_key(
            keypair.public_key
        )

    def test_client_held_stores_no_private_material(self, tmp_path, keypair):
        store = Store(tmp_path)
        protocol.register(
            store,
            "bob",
            custody=CUSTODY_CLIENT,
            public_key=crypto.export_public_key(keypair.public_key),
        )
        with pytest.raises(Exception):
            store.load_private_key("bob")
        assert not any((tmp_path / "keys").iterdir())

    def test_duplicate_user_conflicts(self, tmp_path, keypair):
        store = Store(tmp_path)
        protocol.register(store, "alice", keypair=keypair)
        with pytest.raises(ConflictError):
            protocol.register(store, "alice", keypair=keypair)

    def test_client_held_requires_public_key(self, tmp_path):
        with pytest.raises(ConfigurationError):
            protocol.register(Store(tmp_path), "carol", custody=CUSTODY_CLIENT)

    def test_token_usable(self, tmp_path, keypair):
        store = Store(tmp_path)
        registration = protocol.register(store, "alice", keypair=keypair)
        assert store.check_token("alice", registration.token)
        assert not store.check_token("alice", "wrong")


class TestCreatePost:
    def test_text_post_persisted_and_verifies(self, tmp_path, keypair):
        store = Store(tmp_path)
        protocol.register(store, "alice", keypair=keypair)
        record = protocol.create_post(store, "alice", SCHEME_TEXT, "hello world")
        assert record.scheme == SCHEME_TEXT
        bundle = store.get_evidence(record.post_id)
        assert protocol.verify_bundle(bundle).verdict

    def test_provable_post_persisted_and_verifies(
        self, tmp_path, keypair, image_factory
    ):
        store = Store(tmp_path)
        protocol.register(store, "alice", keypair=keypair)
        record = protocol.create_post(
            store,
            "alice",
            SCHEME_PROVABLE,
            "with image",
            images=[pngio.encode_png(image_factory(64, 64))],
            timestamp=1700000000,
        )
        assert len(record.images) == 1
        bundle = store.get_evidence(record.post_id)
        assert bundle.timestamp == 1700000000
        assert protocol.verify_bundle(bundle).verdict

    def test_client_held_needs_explicit_key(self, tmp_path, keypair):
        store = Store(tmp_path)
        protocol.register(
            store,
            "bob",
            custody=CUSTODY_CLIENT,
            public_key=crypto.export_public_key(keypair.public_key),
        )
        with pytest.raises(ConfigurationError):
            protocol.create_post(store, "bob", SCHEME_TEXT, "no key")
        record = protocol.create_post(
            store, "bob", SCHEME_TEXT, "signed locally",
            private_key=keypair.private_key,
        )
        assert protocol.verify_bundle(store.get_evidence(record.post_id)).verdict

    def test_monotone_timestamps_enforced(self, tmp_path, keypair, image_factory):
        store = Store(tmp_path)
        protocol.register(store, "alice", keypair=keypair)
        img = pngio.encode_png(image_factory(64, 64))
        protocol.create_post(
            store, "alice", SCHEME_PROVABLE, "first", images=[img],
            timestamp=2000,
        )
        with pytest.raises(ClockError):
            protocol.create_post(
                store, "alice", SCHEME_PROVABLE, "second", images=[img],
                timestamp=1999,
            )

    def test_text_with_images_rejected(self, tmp_path, keypair, image_factory):
        store = Store(tmp_path)
        protocol.register(store, "alice", keypair=keypair)
        with pytest.raises(ConfigurationError):
            protocol.create_post(
                store, "alice", SCHEME_TEXT, "m",
                images=[pngio.encode_png(image_factory(8, 8))],
            )

    def test_direct_mode_only_for_text(self, tmp_path, keypair, image_factory):
        store = Store(tmp_path)
        protocol.register(store, "alice", keypair=keypair)
        with pytest.raises(ConfigurationError):
            protocol.create_post(
                store, "alice", SCHEME_SIMPLE, "m",
                images=[pngio.encode_png(image_factory(64, 64))],
                hashing_mode="direct",
            )

    def test_unknown_account(self, tmp_path):
        from postseal.errors import UnknownAccountError

        with pytest.raises(UnknownAccountError):
            protocol.create_post(Store(tmp_path), "ghost", SCHEME_TEXT, "m")


class TestKeyCode:
    def test_render_parse_roundtrip(self, rng):
        for count in (1, 2, 5):
            segments = tuple(bytes(rng.integers(0, 256, 64, dtype=np.uint8)) for _ in range(count))
            code = KeyCode(segments)
            assert KeyCode.parse(code.render()) == code

    def test_rendered_alphabet(self, rng):
        code = KeyCode((os.urandom(256), os.urandom(256)))
        rendered = code.render()
        allowed = set(
            "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_=."
        )
        assert set(rendered) <= allowed

    def test_needs_a_segment(self):
        with pytest.raises(ValueError):
            KeyCode(())
