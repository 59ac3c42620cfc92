"""Run manifest: the declarative description of one evaluation run.

A manifest is a JSON document::

    {
      "datasets": [{"tag": "CRAWLER", "path": "data/crawler.txt"},
                   {"tag": "DLRLC", "path": "data/dlrlc.txt"}],
      "sample": {"n": 1000, "seed": 13},
      "templates": ["restore_diacritics", "restore_diacritics_3s"],
      "template_files": ["prompts/my_template.md"],
      "endpoints": [{"model_id": "openai:gpt-4o", "developer": "OpenAI",
                     "base_url": "https://api.openai.com/v1",
                     "api_key_env": "OPENAI_API_KEY"}],
      "concurrency": 4,
      "cache_dir": "cache",
      "output_dir": "out"
    }

Relative paths are resolved against the manifest's directory.  The digest
covers what determines results (dataset contents, sampling, template
bodies, endpoint parameters, sanitizing, replay mode) and deliberately leaves
out where things are written and how many workers run.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

from .gateway import AuthError, ModelEndpoint
from .prompts import PromptTemplate, get_template, load_template


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    tag: str
    path: Path


@dataclass
class RunManifest:
    datasets: List[DatasetSpec]
    templates: List[PromptTemplate] = field(default_factory=list)
    endpoints: List[ModelEndpoint] = field(default_factory=list)
    sample_size: Optional[int] = None
    seed: int = 0
    concurrency: int = 1
    cache_dir: Optional[Path] = None
    output_dir: Path = Path("out")
    replay_dir: Optional[Path] = None
    sanitize: bool = False
    include_identity: bool = False

    @classmethod
    def load(cls, path: "str | os.PathLike") -> "RunManifest":
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    @classmethod
    def from_dict(cls, data: dict, base_dir: "str | os.PathLike" = ".") -> "RunManifest":
        base = Path(base_dir)

        def resolve(p: Optional[str]) -> Optional[Path]:
            if p is None:
                return None
            p = Path(p)
            return p if p.is_absolute() else base / p

        known = {"datasets", "sample", "templates", "template_files", "endpoints",
                 "concurrency", "cache_dir", "output_dir", "replay_dir", "sanitize",
                 "include_identity"}
        unknown = set(data) - known
        if unknown:
            raise ManifestError(f"unknown manifest fields: {sorted(unknown)}")
        try:
            datasets = [DatasetSpec(d["tag"], resolve(d["path"])) for d in data["datasets"]]
        except (KeyError, TypeError) as exc:
            raise ManifestError("each dataset needs 'tag' and 'path'") from exc
        tags = [d.tag for d in datasets]
        if len(set(tags)) != len(tags):
            raise ManifestError(f"duplicate dataset tags: {tags}")

        templates = []
        for template_id in data.get("templates", []):
            try:
                templates.append(get_template(template_id))
            except KeyError as exc:
                raise ManifestError(str(exc)) from exc
        for tpath in data.get("template_files", []):
            try:
                templates.append(load_template(resolve(tpath)))
            except (OSError, ValueError) as exc:
                raise ManifestError(f"template file {tpath}: {exc}") from exc
        ids = [t.id for t in templates]
        if len(set(ids)) != len(ids):
            raise ManifestError(f"duplicate template ids: {ids}")

        try:
            endpoints = [ModelEndpoint.from_dict(e) for e in data.get("endpoints", [])]
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"bad endpoint: {exc}") from exc
        if endpoints and not templates:
            raise ManifestError("endpoints are configured but no templates are")

        sample = data.get("sample") or {}
        return cls(
            datasets=datasets,
            templates=templates,
            endpoints=endpoints,
            sample_size=sample.get("n"),
            seed=int(sample.get("seed", 0)),
            concurrency=int(data.get("concurrency", 1)),
            cache_dir=resolve(data.get("cache_dir")),
            output_dir=resolve(data.get("output_dir", "out")),
            replay_dir=resolve(data.get("replay_dir")),
            sanitize=bool(data.get("sanitize", False)),
            include_identity=bool(data.get("include_identity", False)),
        )

    def override(self, **changes) -> "RunManifest":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def digest(self) -> str:
        def file_sha(path: Path) -> str:
            try:
                return hashlib.sha256(path.read_bytes()).hexdigest()
            except OSError:
                return "missing"

        payload = {
            "datasets": [{"tag": d.tag, "sha256": file_sha(d.path)} for d in self.datasets],
            "sample": {"n": self.sample_size, "seed": self.seed},
            "templates": [{"id": t.id, "sha256": t.sha256} for t in self.templates],
            "endpoints": [
                {k: v for k, v in e.as_dict().items() if k not in ("max_in_flight",)}
                for e in self.endpoints
            ],
            "sanitize": self.sanitize,
            "replay": self.replay_dir is not None,
            "include_identity": self.include_identity,
        }
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def validate(self) -> None:
        """Fail fast, before any network traffic, on anything that cannot work."""
        for d in self.datasets:
            if not d.path.is_file():
                raise ManifestError(f"dataset {d.tag}: file not found: {d.path}")
        if self.concurrency < 1:
            raise ManifestError("concurrency must be >= 1")
        if self.replay_dir is not None and not self.replay_dir.is_dir():
            raise ManifestError(f"replay directory not found: {self.replay_dir}")
        for e in self.endpoints:
            if self.replay_dir is not None:
                continue
            if e.is_mock:
                if e.base_url != "mock://echo":
                    raise ManifestError(f"{e.model_id}: {e.base_url} needs --replay")
                continue
            if not e.api_key_env:
                continue
            try:
                e.api_key()
            except AuthError as exc:
                raise ManifestError(f"{e.model_id}: {exc}") from exc

    def describe(self) -> dict:
        """JSON-friendly summary written next to the run's artifacts."""
        return {
            "digest": self.digest(),
            "datasets": [{"tag": d.tag, "file": d.path.name} for d in self.datasets],
            "sample": {"n": self.sample_size, "seed": self.seed},
            "templates": [{"id": t.id, "shots": t.shots, "sha256": t.sha256}
                          for t in self.templates],
            "endpoints": [e.as_dict() for e in self.endpoints],
            "sanitize": self.sanitize,
            "replay": self.replay_dir is not None,
            "include_identity": self.include_identity,
        }
