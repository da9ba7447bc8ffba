"""Error types raised by the explanation engine."""


class DvtFormatError(ValueError):
    """Malformed or corrupt DVT tensor file."""


class BundleError(ValueError):
    """Explanation bundle missing files or violating its invariants."""
