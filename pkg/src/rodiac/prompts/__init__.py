"""Prompt templates for model-backed restoration.

Builtin templates are plain-text files shipped next to this module and
verified against pinned SHA-256 digests when loaded.  User templates use the
same format with an optional front-matter block::

    ---
    id: my_template
    shots: 1
    ---
    Restore the diacritics: {input}
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Optional

__all__ = [
    "PLACEHOLDER",
    "PromptTemplate",
    "TemplateError",
    "builtin_templates",
    "get_template",
    "load_template",
    "parse_template",
    "render",
    "count_shots",
]

PLACEHOLDER = "{input}"

# ordered by number of shots / verbosity
_BUILTIN_SHA256 = {
    "restore_diacritics":
        "7d4b5d047de4c565c9ec33fe569a640c88b169a182849156174910d533d7dbb6",
    "restore_diacritics_verbose":
        "03f0a6a97258d649fe79ff652243615b036c79f41246b64b5677f4c6cbc675b7",
    "restore_diacritics_verbose_1s":
        "8e0ab869d6c100d8c35aa51990520617a780a930f2f4b21b4c3a557973a004a7",
    "restore_diacritics_2s":
        "b21f96499b523198729112856c53fb501f7df47ba567b662fd66f157177bb1f3",
    "restore_diacritics_3s":
        "4da8c635565afe21580a8ea64859bf3a7191d89f019d4189c1617f0772bfb0a6",
}

_EXAMPLE_HEADING = re.compile(r"^#{1,2} Example(?: \d+)?\s*$", re.MULTILINE)
_FRONT_MATTER = re.compile(r"\A---\n(.*?)\n---\n", re.DOTALL)


class TemplateError(ValueError):
    pass


def count_shots(body: str) -> int:
    """Number of worked-example headings (``# Example`` / ``## Example N``)."""
    return len(_EXAMPLE_HEADING.findall(body))


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    shots: int = 0

    def __post_init__(self) -> None:
        n = self.body.count(PLACEHOLDER)
        if n != 1:
            raise TemplateError(
                f"template {self.id!r} must contain {PLACEHOLDER} exactly once (found {n})"
            )
        if self.shots != count_shots(self.body):
            raise TemplateError(
                f"template {self.id!r} declares {self.shots} shots but has "
                f"{count_shots(self.body)} example blocks"
            )

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()


def render(template: PromptTemplate, text: str) -> str:
    if not text:
        raise TemplateError("cannot render an empty input")
    if template.body.count(PLACEHOLDER) != 1:
        raise TemplateError(f"template {template.id!r} has no single {PLACEHOLDER}")
    head, tail = template.body.split(PLACEHOLDER)
    return head + text + tail


def parse_template(content: str, default_id: str) -> PromptTemplate:
    meta: Dict[str, str] = {}
    m = _FRONT_MATTER.match(content)
    if m:
        for line in m.group(1).splitlines():
            if not line.strip():
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise TemplateError(f"bad front-matter line {line!r}")
            meta[key.strip()] = value.strip()
        content = content[m.end():]
    template_id = meta.get("id", default_id)
    shots = int(meta["shots"]) if "shots" in meta else count_shots(content)
    return PromptTemplate(template_id, content, shots)


def load_template(path: "str | os.PathLike") -> PromptTemplate:
    with open(path, encoding="utf-8", newline="") as fh:
        content = fh.read()
    stem = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return parse_template(content, stem)


_cache: Optional[List[PromptTemplate]] = None


def builtin_templates() -> List[PromptTemplate]:
    """The five shipped templates, from zero-shot to three-shot."""
    global _cache
    if _cache is None:
        root = resources.files(__name__).joinpath("templates")
        loaded = []
        for template_id, digest in _BUILTIN_SHA256.items():
            data = root.joinpath(template_id + ".md").read_bytes()
            actual = hashlib.sha256(data).hexdigest()
            if actual != digest:
                raise TemplateError(
                    f"builtin template {template_id!r} is corrupted (sha256 {actual})"
                )
            loaded.append(parse_template(data.decode("utf-8"), template_id))
        _cache = loaded
    return list(_cache)


def get_template(template_id: str) -> PromptTemplate:
    for t in builtin_templates():
        if t.id == template_id:
            return t
    raise KeyError(f"unknown template {template_id!r}")
