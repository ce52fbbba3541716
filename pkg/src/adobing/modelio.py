"""Model files: a small JSON document with a format version and 64 weights."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional

from .bing import LinearModel

FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


def model_hash(m: LinearModel) -> str:
    text = ",".join(repr(float(v)) for v in m.w)
    return "sha256:" + hashlib.sha256(text.encode("ascii")).hexdigest()


def dumps_model(m: LinearModel, provenance: Optional[dict] = None) -> str:
    doc = {"format_version": FORMAT_VERSION, "weights": [float(v) for v in m.w]}
    if provenance is not None:
        doc["provenance"] = provenance
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_model(path, m: LinearModel, provenance: Optional[dict] = None) -> None:
    Path(path).write_text(dumps_model(m, provenance))


def loads_model(text: str, source: str = "<string>") -> tuple[LinearModel, Optional[dict]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{source}: not a model file ({exc})") from None
    if not isinstance(doc, dict) or "weights" not in doc:
        raise ModelFileError(f"{source}: missing 'weights'")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFileError(f"{source}: unsupported format_version {version!r}")
    try:
        model = LinearModel(doc["weights"])
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{source}: {exc}") from None
    return model, doc.get("provenance")


def load_model(path) -> LinearModel:
    return load_model_with_provenance(path)[0]


def load_model_with_provenance(path):
    path = Path(path)
    return loads_model(path.read_text(), str(path))
