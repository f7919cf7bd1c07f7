"""Version parsing, normalization and ordering.

Implements the standard public version grammar
``[N!]N(.N)*[{a|b|rc}N][.postN][.devN][+local]`` together with its
lenient spellings (case folding, ``alpha``/``beta``/``c``/``pre``/
``preview`` phase aliases, ``rev``/``r`` post aliases, a bare ``-N``
post form, ``-``/``_`` as separators, and an optional leading ``v``).

Two versions are equal when their comparison keys are equal, so
``1.0`` == ``1.0.0``; normalized *text* still distinguishes the two
spellings, and :func:`sort_key` breaks comparison ties by normalized
text so that sorting is a deterministic total order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property, total_ordering
from typing import Iterable

from .errors import InvalidVersion

__all__ = [
    "Version",
    "parse_version",
    "normalize",
    "compare",
    "sort_key",
    "sorted_versions",
]

# Phases and post-release labels fold to a canonical spelling.
_PRE_ALIASES = {
    "a": "a",
    "alpha": "a",
    "b": "b",
    "beta": "b",
    "rc": "rc",
    "c": "rc",
    "pre": "rc",
    "preview": "rc",
}
_POST_ALIASES = {"post": "post", "rev": "post", "r": "post"}

_VERSION_RE = re.compile(
    r"""
    ^\s*
    v?
    (?:(?P<epoch>[0-9]+)!)?                                    # epoch
    (?P<release>[0-9]+(?:\.[0-9]+)*)                           # release segment
    (?:                                                        # pre-release
        [-_.]?
        (?P<pre_label>a|b|c|rc|alpha|beta|pre|preview)
        [-_.]?
        (?P<pre_number>[0-9]+)?
    )?
    (?:                                                        # post-release
        (?:-(?P<post_bare>[0-9]+))
        |
        (?:
            [-_.]?
            (?P<post_label>post|rev|r)
            [-_.]?
            (?P<post_number>[0-9]+)?
        )
    )?
    (?:                                                        # dev-release
        [-_.]?
        (?P<dev_label>dev)
        [-_.]?
        (?P<dev_number>[0-9]+)?
    )?
    (?:\+(?P<local>[a-z0-9]+(?:[-_.][a-z0-9]+)*))?             # local segment
    \s*$
    """,
    re.VERBOSE | re.IGNORECASE,
)


@total_ordering
@dataclass(frozen=True)
class Version:
    """A parsed version.

    Fields hold the normalized structured form; ``raw`` preserves the
    original spelling. Comparison, equality and hashing use the ordering
    key only, so distinct spellings of the same point on the version
    line (``1.0`` vs ``1.0.0``) compare equal.
    """

    epoch: int
    release: tuple[int, ...]
    pre: tuple[str, int] | None
    post: int | None
    dev: int | None
    local: tuple[int | str, ...] | None
    raw: str

    @cached_property
    def _key(self) -> tuple:
        return _cmpkey(self)

    @property
    def is_prerelease(self) -> bool:
        """True for pre-releases and dev-releases."""
        return self.pre is not None or self.dev is not None

    @property
    def is_postrelease(self) -> bool:
        return self.post is not None

    @property
    def base_version(self) -> str:
        """Epoch and release only, e.g. ``1!2.0``."""
        text = ""
        if self.epoch:
            text += f"{self.epoch}!"
        return text + ".".join(str(part) for part in self.release)

    @property
    def public(self) -> "Version":
        """The same version with any local segment removed."""
        if self.local is None:
            return self
        return Version(
            epoch=self.epoch,
            release=self.release,
            pre=self.pre,
            post=self.post,
            dev=self.dev,
            local=None,
            raw=self.raw,
        )

    def __str__(self) -> str:
        return normalize(self)

    def __repr__(self) -> str:
        return f"Version({normalize(self)!r})"

    def __hash__(self) -> int:
        return hash(self._key)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Version):
            return NotImplemented
        return self._key == other._key

    def __lt__(self, other: "Version") -> bool:
        if not isinstance(other, Version):
            return NotImplemented
        return self._key < other._key


def parse_version(text: str) -> Version:
    """Parse ``text`` into a :class:`Version`.

    Raises :class:`~chainforge.errors.InvalidVersion` when the text does
    not follow the version grammar.
    """
    if not isinstance(text, str):
        raise TypeError(f"version text must be str, not {type(text).__name__}")
    match = _VERSION_RE.match(text)
    if match is None:
        raise InvalidVersion(text, position=_failure_position(text))

    pre = None
    if match.group("pre_label") is not None:
        label = _PRE_ALIASES[match.group("pre_label").lower()]
        pre = (label, int(match.group("pre_number") or "0"))

    post = None
    if match.group("post_bare") is not None:
        post = int(match.group("post_bare"))
    elif match.group("post_label") is not None:
        post = int(match.group("post_number") or "0")

    dev = None
    if match.group("dev_label") is not None:
        dev = int(match.group("dev_number") or "0")

    local = None
    if match.group("local") is not None:
        local = _parse_local(match.group("local"))

    return Version(
        epoch=int(match.group("epoch") or "0"),
        release=tuple(int(part) for part in match.group("release").split(".")),
        pre=pre,
        post=post,
        dev=dev,
        local=local,
        raw=text,
    )


def _parse_local(text: str) -> tuple[int | str, ...]:
    parts: list[int | str] = []
    for part in re.split(r"[-_.]", text.lower()):
        parts.append(int(part) if part.isdigit() else part)
    return tuple(parts)


def _failure_position(text: str) -> int:
    """Best-effort index of the first character that breaks the grammar."""
    for end in range(len(text), 0, -1):
        if _VERSION_RE.match(text[:end]):
            return end
    return 0


def normalize(version: Version) -> str:
    """Render the canonical spelling; re-parsing it yields an equal Version."""
    parts: list[str] = []
    if version.epoch:
        parts.append(f"{version.epoch}!")
    parts.append(".".join(str(part) for part in version.release))
    if version.pre is not None:
        parts.append(f"{version.pre[0]}{version.pre[1]}")
    if version.post is not None:
        parts.append(f".post{version.post}")
    if version.dev is not None:
        parts.append(f".dev{version.dev}")
    if version.local is not None:
        parts.append("+" + ".".join(str(part) for part in version.local))
    return "".join(parts)


def compare(a: Version, b: Version) -> int:
    """Three-way comparison: -1, 0 or 1."""
    if a._key < b._key:
        return -1
    if a._key > b._key:
        return 1
    return 0


def sort_key(version: Version) -> tuple:
    """Deterministic total-order key: comparison key, then normalized text.

    Versions that compare equal but are spelled differently (``1.0`` vs
    ``1.0.0``) get a stable relative order.
    """
    return (version._key, normalize(version))


def sorted_versions(versions: Iterable[Version]) -> list[Version]:
    """Sort ascending by :func:`sort_key`."""
    return sorted(versions, key=sort_key)


def _cmpkey(version: Version) -> tuple:
    # Trailing zeros never affect ordering: 1.0 == 1.0.0.
    release = list(version.release)
    while len(release) > 1 and release[-1] == 0:
        release.pop()

    # Each optional segment maps to a tuple whose first element encodes
    # presence, so mixed-type comparisons never happen.
    if version.pre is not None:
        pre_key: tuple = (1, version.pre[0], version.pre[1])
    elif version.post is None and version.dev is not None:
        # A bare dev-release (1.0.dev1) sorts before any pre-release.
        pre_key = (0,)
    else:
        pre_key = (2,)

    post_key = (0,) if version.post is None else (1, version.post)
    dev_key = (0, version.dev) if version.dev is not None else (1,)

    if version.local is None:
        local_key: tuple = (0,)
    else:
        # Numeric local parts order after alphanumeric ones.
        encoded = tuple(
            (1, part, "") if isinstance(part, int) else (0, 0, part)
            for part in version.local
        )
        local_key = (1, encoded)

    return (version.epoch, tuple(release), pre_key, post_key, dev_key, local_key)
