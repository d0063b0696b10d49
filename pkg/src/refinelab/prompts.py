"""Prompt templates: loading from a template directory and exact rendering.

Templates are plain text files with ``{{ name }}`` placeholders and two
sections split by ``=== system ===`` / ``=== user ===`` marker lines.
Rendering is literal substitution only; a missing placeholder is an error,
an unused context key a warning.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

logger = logging.getLogger(__name__)

_PLACEHOLDER_RE = re.compile(r"\{\{\s*([A-Za-z0-9_]+)\s*\}\}")
_SECTION_RE = re.compile(r"^=== (system|user) ===$", re.MULTILINE)


class PromptError(ValueError):
    """Raised for malformed templates or incomplete render contexts."""


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system_text: str
    user_text: str

    @property
    def placeholders(self) -> frozenset[str]:
        found = set(_PLACEHOLDER_RE.findall(self.system_text))
        found.update(_PLACEHOLDER_RE.findall(self.user_text))
        return frozenset(found)

    def digest(self) -> str:
        raw = f"{self.name}\x00{self.system_text}\x00{self.user_text}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


def render_prompt(
    template: PromptTemplate, ctx: dict[str, object]
) -> tuple[str, str]:
    """Substitute every placeholder; returns (system, user)."""
    required = template.placeholders
    missing = sorted(required - ctx.keys())
    if missing:
        raise PromptError(f"unresolved placeholder: {missing[0]}")
    unused = sorted(set(ctx) - required)
    if unused:
        logger.warning(
            "template %s ignores context keys: %s", template.name, ", ".join(unused)
        )

    def sub(match: re.Match) -> str:
        return str(ctx[match.group(1)])

    return (
        _PLACEHOLDER_RE.sub(sub, template.system_text),
        _PLACEHOLDER_RE.sub(sub, template.user_text),
    )


def _parse_template(name: str, raw: str) -> PromptTemplate:
    parts = _SECTION_RE.split(raw)
    # split() yields ["", "system", <system text>, "user", <user text>]
    if len(parts) != 5 or parts[1] != "system" or parts[3] != "user":
        raise PromptError(
            f"template {name!r} must contain exactly the sections "
            f"'=== system ===' and '=== user ==='"
        )
    system = parts[2].strip("\n")
    user = parts[4].strip("\n")
    if not user:
        raise PromptError(f"template {name!r} has an empty user section")
    return PromptTemplate(name=name, system_text=system, user_text=user)


def load_templates(directory: str | Path | None = None) -> dict[str, PromptTemplate]:
    """Load all ``*.txt`` templates from a directory.

    With no directory, the package's bundled defaults are used.
    """
    templates: dict[str, PromptTemplate] = {}
    if directory is None:
        pkg_dir = resources.files("refinelab") / "templates"
        entries = [(p.name, p.read_text(encoding="utf-8")) for p in pkg_dir.iterdir()]
    else:
        directory = Path(directory)
        if not directory.is_dir():
            raise PromptError(f"not a template directory: {directory}")
        entries = [
            (p.name, p.read_text(encoding="utf-8"))
            for p in sorted(directory.glob("*.txt"))
        ]
    for filename, raw in sorted(entries):
        if not filename.endswith(".txt"):
            continue
        name = filename[: -len(".txt")]
        templates[name] = _parse_template(name, raw)
    if not templates:
        raise PromptError("no templates found")
    return templates


# Verbatim error-focus blocks for the error-specific strategy.
ERROR_DIMENSION_INSTRUCTIONS = {
    "accuracy": (
        "Find ONLY accuracy errors:\n"
        "  • Mistranslations (wrong meaning)\n"
        "  • Omissions (missing source content)\n"
        "  • Additions (extra content not in source)\n"
        "  • Untranslated terms\n"
        "Fix ONLY these errors. Keep all other parts UNCHANGED."
    ),
    "fluency": (
        "Find ONLY fluency errors:\n"
        "  • Grammar mistakes (verb tense, agreement, etc.)\n"
        "  • Awkward or stilted phrasing\n"
        "  • Unnatural word order\n"
        "Fix ONLY these errors. Keep meaning and terminology UNCHANGED."
    ),
}

ERROR_TASK_DESCRIPTIONS = {
    "accuracy": "identify and correct accuracy errors",
    "fluency": "identify and correct fluency errors",
}

# Human-readable language names for prompt contexts.
LANGUAGE_NAMES = {
    "cs": "Czech",
    "de": "German",
    "en": "English",
    "es": "Spanish",
    "ja": "Japanese",
    "ru": "Russian",
    "zh": "Chinese",
}


def language_name(code: str) -> str:
    return LANGUAGE_NAMES.get(code.lower(), code)
