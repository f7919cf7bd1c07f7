"""Shared test helpers: random registry dumps and independent oracles.

The oracles here deliberately avoid chainforge's own engines. Name
normalization is re-derived from the naming standard's one-liner, version
canonicalization and specifier matching come from the `packaging` library,
and extra-gating truth is carried alongside each generated declaration.
Generated inputs stay inside the grammar subset both engines accept.
"""

from __future__ import annotations

import json
import random
import re

from packaging.requirements import Requirement as PkgRequirement
from packaging.version import Version as PkgVersion

VERSION_POOL = [
    "0.1",
    "0.2",
    "0.9.1",
    "1.0a1",
    "1.0",
    "1.0.post1",
    "1.1.dev1",
    "1.2",
    "1.2.1",
    "2.0rc1",
    "2.0",
    "2.0.1",
    "1!1.0",
    "3.4.5",
    "2.0+cu101",
    "1.0.0",
]

_MARKERS = [
    (None, False),
    ("extra == 'dev'", True),
    ('extra == "gpu"', True),
    ("python_version >= '3.6'", False),
    ("os_name == 'posix' and extra == 'test'", True),
]


def oracle_normalize_name(name: str) -> str:
    return re.sub(r"[-_.]+", "-", name).lower()


def oracle_canonical_version(text: str) -> str:
    return str(PkgVersion(text))


def _misspell(rng: random.Random, name: str) -> str:
    """Random legal spelling of a normalized name."""
    out = []
    for ch in name:
        if ch == "-":
            out.append(rng.choice("-_."))
        else:
            out.append(ch.upper() if rng.random() < 0.3 else ch)
    return "".join(out)


def _random_clause(rng: random.Random) -> str:
    v = rng.choice(VERSION_POOL)
    kind = rng.random()
    if kind < 0.15:
        return ""
    if kind < 0.25:
        prefix = ".".join(v.split("+")[0].split("!")[-1].split(".")[:1])
        return rng.choice(["==", "!="]) + prefix + ".*"
    if kind < 0.35:
        base = rng.choice(["1.0", "1.2", "2.0.1", "0.9.1"])
        return "~=" + base
    if kind < 0.5:
        plain = [w for w in VERSION_POOL if "+" not in w]
        lo, hi = rng.choice(plain), rng.choice(plain)
        return f">={lo},<{hi}"
    op = rng.choice([">=", "<=", "<", ">", "==", "!="])
    operand = rng.choice([w for w in VERSION_POOL if "+" not in w]) if op not in ("==", "!=") else v
    return op + operand


def _render_declaration(rng: random.Random, name: str, clause: str, marker: str | None) -> str:
    spelled = _misspell(rng, name) if rng.random() < 0.4 else name
    if rng.random() < 0.2:
        spelled += rng.choice(["[dev]", "[test,docs]"])
    if clause:
        body = f"{spelled} ({clause})" if rng.random() < 0.5 else f"{spelled} {clause}"
    else:
        body = spelled
    if marker:
        body += f" ; {marker}"
    return body


def random_registry(
    rng: random.Random,
    *,
    n_packages: int = 8,
    max_versions: int = 6,
    noise: bool = True,
):
    """Build (jsonl_lines, releases) where releases carries oracle truth.

    releases: dict[(norm_name, canon_version)] -> {
        "upload_time": str | None,
        "declarations": set[(decl_text, norm_target, clause, gated)],
    }
    """
    names = [f"pkg-{chr(ord('a') + i)}" for i in range(n_packages)]
    versions: dict[str, list[str]] = {
        name: sorted(
            rng.sample(VERSION_POOL, rng.randint(1, max_versions)),
            key=lambda t: (PkgVersion(t), t),
        )
        for name in names
    }

    lines: list[str] = []
    releases: dict[tuple[str, str], dict] = {}
    day = 1
    for name in names:
        for version_text in versions[name]:
            day += 1
            month = (day // 28) % 12 + 1
            upload = f"2021-{month:02d}-{day % 28 + 1:02d}T0{day % 9}:00:00Z"
            declarations = set()
            rendered = []
            for _ in range(rng.randint(0, 3)):
                target = rng.choice(names + ["ghost-package"])
                clause = _random_clause(rng)
                marker, gated = rng.choice(_MARKERS)
                text = _render_declaration(rng, target, clause, marker)
                declarations.add((text, target, clause, gated))
                rendered.append(text)
            key = (name, oracle_canonical_version(version_text))
            if key in releases:
                releases[key]["declarations"] |= declarations
                releases[key]["upload_time"] = min(releases[key]["upload_time"], upload)
            else:
                releases[key] = {"upload_time": upload, "declarations": declarations}
            lines.append(
                json.dumps(
                    {
                        "name": _misspell(rng, name) if rng.random() < 0.3 else name,
                        "version": version_text,
                        "upload_time": upload,
                        "requires_dist": rendered or None,
                    }
                )
            )
    # Re-emit a few releases under an equivalent spelling with extra
    # declarations; ingestion must merge them.
    for name in rng.sample(names, min(2, len(names))):
        version_text = rng.choice(versions[name])
        target = rng.choice(names)
        clause = _random_clause(rng)
        marker, gated = rng.choice(_MARKERS)
        text = _render_declaration(rng, target, clause, marker)
        key = (name, oracle_canonical_version(version_text))
        releases[key]["declarations"].add((text, target, clause, gated))
        lines.append(
            json.dumps(
                {
                    "name": _misspell(rng, name),
                    "version": version_text,
                    "upload_time": releases[key]["upload_time"],
                    "requires_dist": [text],
                }
            )
        )
    if noise:
        lines.append("this is not json")
        lines.append('{"name": 42, "version": "1.0"}')
        lines.append('{"name": "bad-version-pkg", "version": "1.0.x"}')
        lines.append("[1, 2, 3]")
    return lines, releases


def naive_dependency_records(releases: dict) -> set[tuple[str, str, str, str, bool]]:
    """Triple-loop materialization using packaging as the matching engine.

    A (up, up_version, down, down_version) pair counts as extra-gated only
    when every declaration producing it is gated.
    """
    known_versions: dict[str, list[str]] = {}
    for (name, canon), _info in releases.items():
        known_versions.setdefault(name, []).append(canon)

    gated_by_pair: dict[tuple[str, str, str, str], bool] = {}
    for (down_name, down_version), info in releases.items():
        for _text, target, clause, gated in info["declarations"]:
            candidates = known_versions.get(target)
            if not candidates:
                continue
            spec = PkgRequirement(f"x ({clause})" if clause else "x").specifier
            admit = bool(spec.prereleases)
            for up_version in candidates:
                if spec.contains(PkgVersion(up_version), prereleases=admit):
                    pair = (target, up_version, down_name, down_version)
                    gated_by_pair[pair] = gated_by_pair.get(pair, True) and gated
    return {pair + (gated,) for pair, gated in gated_by_pair.items()}
