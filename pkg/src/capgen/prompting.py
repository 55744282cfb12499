"""Sample snippets from the pool and render the full instruction payload.

The rule text ships as a versioned template asset (``rules_version`` picks the
file pair); snippet selection is a seeded draw without replacement over the
eligible pool in stored order, so an identical PromptSpec always renders a
byte-identical prompt.
"""

import ast
import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .registry import SnippetRecord

logger = logging.getLogger(__name__)

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")


class PromptError(Exception):
    pass


class InsufficientPoolError(PromptError):
    pass


class TemplateError(PromptError):
    pass


@dataclass
class PromptSpec:
    baseline_source: str
    snippet_count: int
    snippet_pool: list[SnippetRecord]
    base_name: str
    excluded_families: frozenset = frozenset()
    seed: int = 0
    rules_version: str = "v1"
    temperature: float = 0.8
    max_chars: int | None = None


@dataclass
class PromptText:
    system_message: str
    user_message: str
    snippet_manifest: list[str] = field(default_factory=list)
    family_prefix: str = ""


def family_prefix(n: int, base_name: str) -> str:
    """C{N}C-{base_name}, the family naming scheme for generated models."""
    if n < 1:
        raise ValueError("snippet count must be >= 1")
    if not base_name:
        raise ValueError("base_name must be non-empty")
    return f"C{n}C-{base_name}"


def prompt_hash(system_message: str, user_message: str) -> str:
    """Stable digest over the canonical UTF-8 prompt bytes."""
    digest = hashlib.sha256()
    digest.update(system_message.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(user_message.encode("utf-8"))
    return digest.hexdigest()


def sample_snippets(pool, n, excluded_families=frozenset(), seed=0) -> list[SnippetRecord]:
    """Draw n distinct encoder-donor snippets, skipping excluded families."""
    excluded = set(excluded_families)
    eligible = [
        s for s in pool
        if s.role_tag == "encoder-donor" and s.family not in excluded
    ]
    if len(eligible) < n:
        raise InsufficientPoolError(
            f"need {n} snippets but only {len(eligible)} eligible in pool"
        )
    return random.Random(seed).sample(eligible, n)


def load_template(rules_version: str = "v1", template_dir=None) -> tuple[str, str]:
    """(system, user) template texts for a rules version.

    `template_dir` overrides the packaged assets; it must contain
    ``rules_<version>_system.txt`` and ``rules_<version>_user.txt``.
    """
    names = (f"rules_{rules_version}_system.txt", f"rules_{rules_version}_user.txt")
    if template_dir is not None:
        base = Path(template_dir)
        paths = [base / name for name in names]
        if not all(p.exists() for p in paths):
            raise TemplateError(f"template files {names} not found under {base}")
        return tuple(p.read_text(encoding="utf-8") for p in paths)
    package = resources.files("capgen") / "templates"
    paths = [package / name for name in names]
    try:
        return tuple(p.read_text(encoding="utf-8") for p in paths)
    except FileNotFoundError as exc:
        raise TemplateError(f"unknown rules_version {rules_version!r}") from exc


def _render(template: str, values: dict) -> str:
    def sub(match):
        name = match.group(1)
        if name not in values:
            raise TemplateError(f"template variable unresolved: {name}")
        return str(values[name])

    return _PLACEHOLDER_RE.sub(sub, template)


def render_snippet_section(snippets) -> str:
    parts = []
    for i, snippet in enumerate(snippets, 1):
        parts.append(
            f"### Snippet {i}: {snippet.family} ({snippet.snippet_id})\n"
            f"```python\n{snippet.source_text.rstrip()}\n```"
        )
    return "\n\n".join(parts)


def assemble_prompt(spec: PromptSpec) -> PromptText:
    """Deterministically render the full instruction payload for a spec."""
    if spec.temperature <= 0:
        raise ValueError("temperature must be > 0")
    try:
        ast.parse(spec.baseline_source)
    except SyntaxError as exc:
        raise PromptError(f"baseline fails to parse: line {exc.lineno}: {exc.msg}") from exc

    snippets = sample_snippets(
        spec.snippet_pool, spec.snippet_count, spec.excluded_families, spec.seed
    )
    system_template, user_template = load_template(spec.rules_version)
    user_message = _render(
        user_template,
        {
            "base_name": spec.base_name,
            "snippet_count": spec.snippet_count,
            "baseline_source": spec.baseline_source.rstrip(),
            "snippets": render_snippet_section(snippets),
        },
    )
    if spec.max_chars is not None and len(user_message) > spec.max_chars:
        logger.warning(
            "prompt length %d exceeds budget %d; sending anyway",
            len(user_message), spec.max_chars,
        )
    return PromptText(
        system_message=system_template,
        user_message=user_message,
        snippet_manifest=[s.snippet_id for s in snippets],
        family_prefix=family_prefix(spec.snippet_count, spec.base_name),
    )


def load_snippet_pool(directory) -> list[SnippetRecord]:
    """Read a snippet pool from a directory holding source files + manifest.json."""
    base = Path(directory)
    manifest_path = base / "manifest.json"
    if not manifest_path.exists():
        raise PromptError(f"no manifest.json under {base}")
    entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    pool = []
    for entry in entries:
        source = (base / entry["file"]).read_text(encoding="utf-8")
        pool.append(
            SnippetRecord(
                snippet_id=entry.get("id", Path(entry["file"]).stem),
                family=entry["family"],
                source_text=source,
                role_tag=entry.get("role_tag", "encoder-donor"),
            )
        )
    return pool


def packaged_snippet_pool() -> list[SnippetRecord]:
    """The snippet pool shipped with the package."""
    root = resources.files("capgen") / "assets" / "snippets"
    with resources.as_file(root) as path:
        return load_snippet_pool(path)


def packaged_baseline() -> str:
    """Source of the compliant reference captioning baseline."""
    return (resources.files("capgen") / "assets" / "baseline_resnet_lstm.py").read_text(
        encoding="utf-8"
    )
