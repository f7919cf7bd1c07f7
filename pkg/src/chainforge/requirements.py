"""Dependency declarations: names, version specifiers and requirement strings.

Parses the common dependency grammar ``name[extras] (specifiers) ; marker``
with both parenthesized and bare specifier lists. Markers are kept as raw
text; the only marker semantics evaluated is whether the clause references
the ``extra`` variable, which flags optional (extra-gated) dependencies.

Specifier matching follows the classic resolver rules:

* pre-release and dev versions match a clause list only when some clause's
  operand itself names a pre-release or dev version, or the caller opts in;
* ``==`` / ``!=`` support a trailing ``.*`` wildcard that compares epoch
  and release prefix only, padding with zeros in both directions;
* ``<=`` / ``>=`` compare against the candidate's public version (any
  local segment stripped);
* ``> V`` does not match post-releases or local versions *of V* unless
  V is itself a post-release;
* ``< V`` does not match pre-releases *of V* (anything between V's
  earliest pre-release and V) unless V is itself a pre-release;
* ``~= X.Y`` is equivalent to ``>= X.Y, == X.*``;
* ``===`` compares normalized text case-insensitively.

Local version segments are accepted as operands for every comparison
operator (metadata in the wild contains clauses like ``>=1.0+cuda``),
except with ``~=`` and wildcards, where a local segment has no meaning.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import InvalidName, InvalidRequirement, InvalidSpecifier, InvalidVersion
from .versions import Version, normalize, parse_version, sort_key

__all__ = [
    "SpecifierSet",
    "Requirement",
    "normalize_name",
    "parse_specifier_set",
    "parse_requirement",
    "matches",
    "satisfying_versions",
]

_NAME_RE = re.compile(r"[A-Za-z0-9](?:[A-Za-z0-9._-]*[A-Za-z0-9])?")
_OPERATORS = ("===", "==", "!=", "<=", ">=", "~=", "<", ">")
_CLAUSE_RE = re.compile(r"\s*(===|==|!=|<=|>=|~=|<|>)\s*([^\s,]+)\s*$")


def normalize_name(text: str) -> str:
    """Normalize a package name: lowercase, runs of ``-_.`` collapse to ``-``.

    Raises :class:`~chainforge.errors.InvalidName` when the text does not
    follow the naming grammar (must start and end with a letter or digit).
    """
    if not isinstance(text, str):
        raise TypeError(f"name must be str, not {type(text).__name__}")
    if not _NAME_RE.fullmatch(text):
        raise InvalidName(text)
    return re.sub(r"[-_.]+", "-", text).lower()


@dataclass(frozen=True)
class SpecifierSet:
    """A conjunction of version specifier clauses.

    ``clauses`` holds ``(operator, operand)`` pairs with operand text as
    written (whitespace stripped). The empty clause list is valid and
    matches every non-pre-release version.
    """

    clauses: tuple[tuple[str, str], ...] = ()

    def __str__(self) -> str:
        return ",".join(op + operand for op, operand in self.clauses)

    @property
    def admits_prereleases(self) -> bool:
        """True when some clause operand itself names a pre-release or dev version."""
        for op, operand in self.clauses:
            if op == "!=":
                continue
            text = operand[:-2] if operand.endswith(".*") else operand
            try:
                candidate = parse_version(text)
            except InvalidVersion:
                continue
            if candidate.is_prerelease:
                return True
        return False


def parse_specifier_set(text: str) -> SpecifierSet:
    """Parse a comma-separated clause list such as ``>=1.0,!=1.5.*,<2``."""
    if not isinstance(text, str):
        raise TypeError(f"specifier text must be str, not {type(text).__name__}")
    stripped = text.strip()
    if not stripped:
        return SpecifierSet()
    clauses = []
    for chunk in stripped.split(","):
        if not chunk.strip():
            raise InvalidSpecifier(text, reason="empty clause")
        clauses.append(_parse_clause(chunk))
    return SpecifierSet(tuple(clauses))


def _parse_clause(chunk: str) -> tuple[str, str]:
    match = _CLAUSE_RE.match(chunk)
    if match is None:
        raise InvalidSpecifier(chunk.strip(), reason="expected <operator><version>")
    op, operand = match.group(1), match.group(2)

    if op == "===":
        # Arbitrary equality accepts any non-empty operand text.
        return (op, operand)

    wildcard = operand.endswith(".*")
    if wildcard and op not in ("==", "!="):
        raise InvalidSpecifier(chunk.strip(), reason=f"'.*' is not allowed with {op}")
    try:
        parsed = parse_version(operand[:-2] if wildcard else operand)
    except InvalidVersion as exc:
        raise InvalidSpecifier(chunk.strip(), reason=str(exc)) from exc

    if wildcard and (
        parsed.pre is not None
        or parsed.post is not None
        or parsed.dev is not None
        or parsed.local is not None
    ):
        raise InvalidSpecifier(
            chunk.strip(), reason="wildcard operand must be a plain epoch+release"
        )
    if op == "~=":
        if len(parsed.release) < 2:
            raise InvalidSpecifier(
                chunk.strip(), reason="~= needs at least two release segments"
            )
        if parsed.local is not None:
            raise InvalidSpecifier(chunk.strip(), reason="~= operand cannot be local")
    return (op, operand)


@dataclass(frozen=True)
class Requirement:
    """A parsed dependency declaration."""

    name: str                       # normalized package name
    extras: tuple[str, ...] = ()    # normalized, sorted
    specifiers: SpecifierSet = field(default_factory=SpecifierSet)
    marker: str | None = None       # raw marker text after ';', if any
    extra_gated: bool = False       # marker references the `extra` variable

    def __str__(self) -> str:
        text = self.name
        if self.extras:
            text += "[" + ",".join(self.extras) + "]"
        if self.specifiers.clauses:
            text += str(self.specifiers)
        if self.marker is not None:
            text += "; " + self.marker
        return text


def parse_requirement(text: str) -> Requirement:
    """Parse a dependency declaration string.

    Handles bare and parenthesized specifier lists, extras, and markers:
    ``torch (>=1.4.0)``, ``requests[security] >=2.0,<3``,
    ``tensorflow-gpu (>=2.0) ; extra == "gpu"``.
    """
    if not isinstance(text, str):
        raise TypeError(f"requirement text must be str, not {type(text).__name__}")
    pos = _skip_ws(text, 0)
    name_match = _NAME_RE.match(text, pos)
    if name_match is None:
        raise InvalidRequirement(text, pos, reason="expected package name")
    name = normalize_name(name_match.group(0))
    pos = _skip_ws(text, name_match.end())

    extras: tuple[str, ...] = ()
    if pos < len(text) and text[pos] == "[":
        closing = text.find("]", pos)
        if closing == -1:
            raise InvalidRequirement(text, pos, reason="unclosed extras bracket")
        raw_extras = text[pos + 1 : closing]
        names = []
        for item in raw_extras.split(","):
            item = item.strip()
            if not item and raw_extras.strip():
                raise InvalidRequirement(text, pos, reason="empty extra name")
            if item:
                try:
                    names.append(normalize_name(item))
                except InvalidName as exc:
                    raise InvalidRequirement(text, pos, reason=str(exc)) from exc
        extras = tuple(sorted(set(names)))
        pos = _skip_ws(text, closing + 1)

    spec_text = ""
    if pos < len(text) and text[pos] == "@":
        # Direct URL reference: no version clauses apply.
        marker_split = text.find(";", pos)
        pos = len(text) if marker_split == -1 else marker_split
    elif pos < len(text) and text[pos] == "(":
        closing = text.find(")", pos)
        if closing == -1:
            raise InvalidRequirement(text, pos, reason="unclosed parenthesis")
        spec_text = text[pos + 1 : closing]
        pos = _skip_ws(text, closing + 1)
        if pos < len(text) and text[pos] not in ";":
            raise InvalidRequirement(text, pos, reason="unexpected text after specifiers")
    else:
        marker_split = text.find(";", pos)
        end = len(text) if marker_split == -1 else marker_split
        spec_text = text[pos:end]
        pos = end

    marker: str | None = None
    if pos < len(text) and text[pos] == ";":
        marker = text[pos + 1 :].strip() or None
    elif pos < len(text) and text[pos:].strip():
        raise InvalidRequirement(text, pos, reason="unexpected trailing text")

    try:
        specifiers = parse_specifier_set(spec_text)
    except InvalidSpecifier as exc:
        raise InvalidRequirement(text, pos, reason=str(exc)) from exc

    return Requirement(
        name=name,
        extras=extras,
        specifiers=specifiers,
        marker=marker,
        extra_gated=marker is not None and _references_extra(marker),
    )


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _references_extra(marker: str) -> bool:
    unquoted = re.sub(r"'[^']*'|\"[^\"]*\"", "", marker)
    return re.search(r"\bextra\b", unquoted) is not None


def matches(specifiers: SpecifierSet, version: Version, prereleases: bool | None = None) -> bool:
    """True when ``version`` satisfies every clause.

    Pre-release and dev versions are admitted only when some clause operand
    names one, or ``prereleases=True`` overrides the gate.
    """
    admit = specifiers.admits_prereleases if prereleases is None else prereleases
    if version.is_prerelease and not admit:
        return False
    return all(_clause_matches(op, operand, version) for op, operand in specifiers.clauses)


def satisfying_versions(
    specifiers: SpecifierSet,
    candidates: Iterable[Version],
    prereleases: bool | None = None,
) -> list[Version]:
    """Filter ``candidates`` by :func:`matches`, ascending by version order."""
    keep = [v for v in candidates if matches(specifiers, v, prereleases)]
    keep.sort(key=sort_key)
    return keep


def _clause_matches(op: str, operand: str, version: Version) -> bool:
    if op == "===":
        return normalize(version) == operand.strip().lower()

    wildcard = operand.endswith(".*")
    if wildcard:
        matched = _prefix_matches(parse_version(operand[:-2]), version)
        return matched if op == "==" else not matched

    target = parse_version(operand)
    if op == "==":
        return _equal(version, target)
    if op == "!=":
        return not _equal(version, target)
    if op == "<=":
        return version.public._key <= target._key
    if op == ">=":
        return version.public._key >= target._key
    if op == "<":
        if not version._key < target._key:
            return False
        # A pre-release of the operand is not "less than" it: anything at
        # or above the operand's earliest pre-release is shut out.
        if version.is_prerelease and not target.is_prerelease:
            earliest = replace(target, dev=0, local=None)
            if version._key >= earliest._key:
                return False
        return True
    if op == ">":
        if not version._key > target._key:
            return False
        # A post-release of the operand does not exceed it.
        if version.is_postrelease and not target.is_postrelease:
            if replace(version, post=None, dev=None, local=None)._key == target._key:
                return False
        # Nor does a local version of the operand.
        if version.local is not None and version.public._key == target._key:
            return False
        return True
    if op == "~=":
        prefix = Version(
            epoch=target.epoch,
            release=target.release[:-1],
            pre=None,
            post=None,
            dev=None,
            local=None,
            raw=operand,
        )
        return version.public._key >= target._key and _prefix_matches(prefix, version)
    raise InvalidSpecifier(op + operand, reason="unknown operator")


def _equal(version: Version, target: Version) -> bool:
    if target.local is not None:
        return version._key == target._key
    return version.public._key == target._key


def _prefix_matches(prefix: Version, version: Version) -> bool:
    """Epoch must match; the release prefix comparison pads with zeros."""
    if version.epoch != prefix.epoch:
        return False
    release = version.release
    if len(release) < len(prefix.release):
        release = release + (0,) * (len(prefix.release) - len(release))
    return release[: len(prefix.release)] == prefix.release
