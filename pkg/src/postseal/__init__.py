"""Credibility toolkit for micro-blog posts.

Signs text and image posts into publicly verifiable key-codes, binds images
to their posts via detection watermarks, and lets any third party verify
origin, integrity and prior existence of a post from a self-contained
evidence bundle.
"""

from .crypto import (
    KeyPair,
    decode64,
    digest,
    encode64,
    generate_keypair,
    sign_digest,
    verify_segment,
)
from .models import (
    Account,
    Check,
    EvidenceBundle,
    KeyCode,
    PostRecord,
    VerificationResult,
)
from .protocol import (
    canonicalize,
    compose_pictured_post_provable,
    compose_pictured_post_simple,
    compose_text_post,
    create_post,
    register,
    verify_bundle,
    verify_pictured_post_provable,
    verify_pictured_post_simple,
    verify_text_post,
)
from .store import Store
from .watermark import capacity, detect, embed, extract

__version__ = "0.1.0"

__all__ = [
    "Account",
    "Check",
    "EvidenceBundle",
    "KeyCode",
    "KeyPair",
    "PostRecord",
    "Store",
    "VerificationResult",
    "canonicalize",
    "capacity",
    "compose_pictured_post_provable",
    "compose_pictured_post_simple",
    "compose_text_post",
    "create_post",
    "decode64",
    "detect",
    "digest",
    "embed",
    "encode64",
    "extract",
    "generate_keypair",
    "register",
    "sign_digest",
    "verify_bundle",
    "verify_pictured_post_provable",
    "verify_pictured_post_simple",
    "verify_segment",
    "verify_text_post",
]
