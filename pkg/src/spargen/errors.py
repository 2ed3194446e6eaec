"""Exception types shared across the package."""


class SpargenError(Exception):
    pass


class ParseError(SpargenError):
    """Malformed input file."""


class ValidationError(SpargenError):
    """Input parsed but violates an invariant."""


class ConfigError(SpargenError):
    pass


class BehindCamera(SpargenError):
    pass


class DegenerateGeometry(SpargenError):
    pass


class MissingBinding(SpargenError):
    def __init__(self, placeholder):
        super().__init__(f"no binding for placeholder [{placeholder}]")
        self.placeholder = placeholder


class OutOfBounds(SpargenError):
    pass


class Discarded(SpargenError):
    """A candidate dropped by a generation or validity rule.

    ``reason`` is a short CamelCase tag (``LowVisibility``, ``Overlap``, ...)
    that ends up in skip logs.
    """

    def __init__(self, reason, detail=""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class Rejected(Discarded):
    pass


class Skipped(Discarded):
    pass


class BadFrame(SpargenError):
    """A prediction refers to a frame that does not match the one supplied."""
