"""Extraction specs: what to encode, with which encoders, into which bundle."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class ExtractionError(Exception):
    pass


@dataclass(frozen=True)
class ExtractionSpec:
    """One dataset's extraction plan.

    Class order is frozen from the class-list file; every emitted matrix
    follows it. Encoder identifiers look like "fixture:<name>:<dim>" for the
    deterministic CI encoders or "sbert:<model-name>" for a real sentence
    encoder. Paths are resolved relative to the spec file.
    """

    dataset: str
    split: str
    class_list: Path
    captions: Path
    phi_encoder: str
    vlm_encoders: dict[str, str]
    output_dir: Path
    synonyms: Path | None = None
    template: str = "a photo of a {class}"
    batch_size: int = 32
    images_per_class: int = 8
    passthrough_images: bool = False
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExtractionSpec":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        base = path.parent

        def respath(key, required=True):
            if key not in raw or raw[key] is None:
                if required:
                    raise ExtractionError(f"{path}: missing required key {key!r}")
                return None
            return (base / raw[key]).resolve()

        known = {
            "dataset", "split", "class_list", "captions", "synonyms",
            "phi_encoder", "vlm_encoders", "template", "batch_size",
            "images_per_class", "passthrough_images", "output_dir",
        }
        extra = {k: v for k, v in raw.items() if k not in known}
        return cls(
            dataset=raw["dataset"],
            split=raw.get("split", "test"),
            class_list=respath("class_list"),
            captions=respath("captions"),
            synonyms=respath("synonyms", required=False),
            phi_encoder=raw["phi_encoder"],
            vlm_encoders=dict(raw["vlm_encoders"]),
            template=raw.get("template", "a photo of a {class}"),
            batch_size=int(raw.get("batch_size", 32)),
            images_per_class=int(raw.get("images_per_class", 8)),
            passthrough_images=bool(raw.get("passthrough_images", False)),
            output_dir=(base / raw["output_dir"]).resolve(),
            extra=extra,
        )

    def load_classes(self) -> list[str]:
        names = [
            line.strip()
            for line in self.class_list.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if not names:
            raise ExtractionError(f"{self.class_list}: empty class list")
        if len(set(names)) != len(names):
            raise ExtractionError(f"{self.class_list}: duplicate class names")
        return names

    def load_texts(self, path: Path, classes: list[str]) -> dict[str, list[str]]:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        missing = [c for c in classes if c not in data or not data[c]]
        if missing:
            raise ExtractionError(f"{path}: no texts for classes {missing}")
        return {c: list(data[c]) for c in classes}
