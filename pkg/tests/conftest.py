from __future__ import annotations

import numpy as np
import pytest

from postseal import crypto

# Key generation dominates test runtime, so a couple of session-scoped pairs
# are shared by every test that does not specifically need a fresh key.


@pytest.fixture(scope="session")
def keypair() -> crypto.KeyPair:
    return crypto.generate_keypair(2048)


@pytest.fixture(scope="session")
def other_keypair() -> crypto.KeyPair:
    return crypto.generate_keypair(2048)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260809)


def make_image(
    rng: np.random.Generator, width: int = 64, height: int = 64, channels: int = 3
) -> np.ndarray:
    return rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8)


@pytest.fixture
def image_factory(rng):
    def factory(width: int = 64, height: int = 64, channels: int = 3) -> np.ndarray:
        return make_image(rng, width, height, channels)

    return factory
