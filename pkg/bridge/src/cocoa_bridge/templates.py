"""Prompt templates, stored as data files rather than code.

A template is plain text containing the literal marker {question}. Named
templates ship inside the package; anything else is treated as a file path.
"""

from __future__ import annotations

from importlib import resources

from .errors import ConfigError

MARKER = "{question}"


def builtin_names() -> tuple[str, ...]:
    folder = resources.files("cocoa_bridge") / "templates"
    return tuple(sorted(p.name[: -len(".txt")] for p in folder.iterdir()
                        if p.name.endswith(".txt")))


def load_template(name_or_path: str) -> str:
    candidate = resources.files("cocoa_bridge") / "templates" / f"{name_or_path}.txt"
    if candidate.is_file():
        text = candidate.read_text(encoding="utf-8")
    else:
        try:
            with open(name_or_path, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise ConfigError(
                f"template {name_or_path!r} is neither a built-in "
                f"({', '.join(builtin_names())}) nor a readable file: {exc}"
            ) from exc
    if MARKER not in text:
        raise ConfigError(f"template {name_or_path!r} lacks the {MARKER} marker")
    return text


def render(template: str, question: str) -> str:
    # Plain replacement: templates may contain other braces verbatim.
    return template.replace(MARKER, question)
