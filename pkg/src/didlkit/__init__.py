"""didlkit: declare, validate, store, and serve compound digital objects."""

__version__ = "0.1.0"

from didlkit.codec import canonical_bytes, parse_didl, serialize_didl  # noqa: E402
from didlkit.model import DidlDocument  # noqa: E402
from didlkit.repository import AssetManifest, PackageStore  # noqa: E402
from didlkit.validator import rule_catalog, validate, validate_bytes  # noqa: E402

__all__ = [
    "__version__",
    "AssetManifest",
    "DidlDocument",
    "PackageStore",
    "canonical_bytes",
    "parse_didl",
    "rule_catalog",
    "serialize_didl",
    "validate",
    "validate_bytes",
]
