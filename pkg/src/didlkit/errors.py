"""Exception types shared across the toolkit."""

from __future__ import annotations


class DidlkitError(Exception):
    """Base class for all toolkit errors."""


class ModelError(DidlkitError):
    """A node was constructed in violation of a structural invariant."""


class PathError(DidlkitError, LookupError):
    """A node path does not resolve inside the document."""


class SerializeError(DidlkitError):
    """The document cannot be emitted as valid XML (e.g. broken base64)."""


class FetchError(DidlkitError):
    """A by-reference payload could not be retrieved."""

    def __init__(self, message: str, uri: str | None = None):
        super().__init__(message)
        self.uri = uri


class NonDigitalResourceError(FetchError):
    """The reference uses a scheme configured as non-dereferenceable."""


class DecodeError(DidlkitError):
    """Payload bytes could not be decoded (base64 or content-encoding)."""


class UnsupportedEncodingError(DecodeError):
    """A content-encoding token outside the supported set was used."""


class MalformedIdentifierError(DidlkitError):
    """An identifier statement does not hold a single absolute URI."""


class BadTargetError(DidlkitError):
    """The addressed node cannot host an identifier descriptor."""


class InvalidUriError(DidlkitError):
    """A URI expected to be absolute is not."""


class SealError(DidlkitError):
    """Integrity sealing failed."""


class EquivalenceViolationError(SealError):
    """Refusing to seal a component whose resources are not bit-equivalent."""


class StoreError(DidlkitError):
    """Base class for repository storage errors."""


class PackageNotFoundError(StoreError, LookupError):
    """No package with the given identifier exists in the store."""


class FragmentNotFoundError(StoreError, LookupError):
    """The package exists but holds no element with the given XML ID."""


class BadCursorError(StoreError):
    """A resumption cursor is malformed or was not issued by this store."""


class ManifestError(StoreError):
    """The asset manifest is invalid or produced an invalid document."""


class IdCollisionError(StoreError):
    """The identifier source produced a package identifier already in use."""
