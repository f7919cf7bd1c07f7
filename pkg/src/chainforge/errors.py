"""Exception hierarchy shared across the toolkit.

Every error raised by chainforge on bad input derives from ChainforgeError,
so callers (CLI, HTTP service) can map the whole family to a single
"client error" path while programmatic users can catch specific types.
"""

from __future__ import annotations


class ChainforgeError(Exception):
    """Base class for all chainforge errors."""


class InvalidVersion(ChainforgeError, ValueError):
    """Raised when text cannot be parsed as a version.

    Carries the offending text and the character position where parsing
    failed (0 when the text is rejected as a whole).
    """

    def __init__(self, text: str, position: int = 0, reason: str | None = None):
        self.text = text
        self.position = position
        self.reason = reason
        detail = f"invalid version: {text!r}"
        if reason:
            detail += f" ({reason})"
        super().__init__(detail)


class InvalidSpecifier(ChainforgeError, ValueError):
    """Raised when a version specifier clause or clause list is malformed."""

    def __init__(self, text: str, position: int = 0, reason: str | None = None):
        self.text = text
        self.position = position
        self.reason = reason
        detail = f"invalid specifier: {text!r}"
        if reason:
            detail += f" ({reason})"
        super().__init__(detail)


class InvalidRequirement(ChainforgeError, ValueError):
    """Raised when a dependency declaration string cannot be parsed."""

    def __init__(self, text: str, position: int = 0, reason: str | None = None):
        self.text = text
        self.position = position
        self.reason = reason
        detail = f"invalid requirement: {text!r} at position {position}"
        if reason:
            detail += f" ({reason})"
        super().__init__(detail)


class InvalidName(ChainforgeError, ValueError):
    """Raised when a package name does not follow the naming grammar."""

    def __init__(self, text: str):
        self.text = text
        super().__init__(f"invalid package name: {text!r}")


class FormatError(ChainforgeError, ValueError):
    """Raised when an input stream or file is not in the expected format."""


class UnsupportedFormat(ChainforgeError, ValueError):
    """Raised when an export or report format name is not recognized."""

    def __init__(self, fmt: str, supported: tuple[str, ...] = ()):
        self.format = fmt
        self.supported = supported
        detail = f"unsupported format: {fmt!r}"
        if supported:
            detail += f" (supported: {', '.join(supported)})"
        super().__init__(detail)


class UnknownSeed(ChainforgeError, KeyError):
    """Raised when a seed package is absent from the registry."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"seed package not in registry: {name!r}")

    def __str__(self) -> str:  # KeyError.__str__ would repr the message
        return self.args[0]


class EmptyGraph(ChainforgeError, ValueError):
    """Raised when an operation needs a non-empty graph but got none."""


class DegenerateCluster(ChainforgeError, ValueError):
    """Raised when a cluster is too small to carry a shape (one node, no self-loop)."""

    def __init__(self, members):
        self.members = tuple(members)
        super().__init__(
            f"cluster {list(self.members)!r} has a single node and no self-loop; "
            "no shape is defined"
        )


class EmptySample(ChainforgeError, ValueError):
    """Raised when a statistical test receives an empty sample."""


class InvalidP(ChainforgeError, ValueError):
    """Raised when a p-value lies outside [0, 1]."""

    def __init__(self, value):
        self.value = value
        super().__init__(f"p-value out of range [0, 1]: {value!r}")


class InvalidCounts(ChainforgeError, ValueError):
    """Raised when proportion-test counts are inconsistent (k > n or n == 0)."""


class MissingUploadTime(ChainforgeError, ValueError):
    """Raised when an operation requires an upload time that the dump lacks."""


class ArtifactMismatch(ChainforgeError, ValueError):
    """Raised when artifacts built from different registry dumps are mixed."""
