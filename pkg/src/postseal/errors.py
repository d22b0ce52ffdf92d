"""Exception types shared across the package."""


class PostsealError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(PostsealError):
    """Unsupported or inconsistent configuration, e.g. a disallowed key size."""


class EncodingError(PostsealError, ValueError):
    """Malformed transport encoding (base64url text, key-code rendering, PNG bytes).

    ``offset`` is the character offset of the first offending input position
    when it is known, otherwise None.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class SigningError(PostsealError):
    """Signing failed, typically because the key material is unusable."""


class ModeError(PostsealError):
    """The requested hashing mode cannot handle the given message."""


class CapacityError(PostsealError):
    """Payload does not fit into the target image.

    Carries the byte counts involved and, when raised while composing a
    multi-image post, the zero-based index of the offending image.
    """

    def __init__(self, required: int, available: int, image_index: int | None = None):
        self.required = required
        self.available = available
        self.image_index = image_index
        where = f" (image {image_index})" if image_index is not None else ""
        super().__init__(
            f"payload needs {required} bytes but image{where} can hold {available}"
        )


class ConflictError(PostsealError):
    """An insert collided with an existing record (duplicate id or key-code)."""


class UnknownAccountError(PostsealError):
    """Referenced account is not registered."""


class NotFoundError(PostsealError):
    """Referenced record does not exist."""


class ClockError(PostsealError):
    """Timestamp not monotone within the account's posting sequence."""
