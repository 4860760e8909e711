"""Versioned JSON model files.

Floats are written with Python's shortest round-trip repr, so a
save/load cycle reproduces every score bit-for-bit.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..dataset import BinSpec
from .model import EbmModel, Term

SCHEMA_VERSION = 1


class ModelFormatError(ValueError):
    pass


def model_to_dict(model: EbmModel) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "link": model.link,
        "intercept": model.intercept,
        "bin_spec": model.bin_spec.to_dict(),
        "terms": [{"kind": t.kind, "features": list(t.features),
                   "scores": t.scores.tolist()} for t in model.terms],
    }


def model_from_dict(d: dict) -> EbmModel:
    if not isinstance(d, dict) or "version" not in d:
        raise ModelFormatError("not a model document (no version field)")
    if d["version"] != SCHEMA_VERSION:
        raise ModelFormatError(f"model schema version {d['version']!r} is not "
                               f"supported (expected {SCHEMA_VERSION})")
    try:
        terms = tuple(Term(t["kind"], tuple(t["features"]), t["scores"])
                      for t in d["terms"])
        return EbmModel(float(d["intercept"]), d["link"],
                        BinSpec.from_dict(d["bin_spec"]), terms)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model document: {exc}") from exc


def save_model(model: EbmModel, path) -> None:
    text = json.dumps(model_to_dict(model), allow_nan=False, separators=(",", ":"))
    Path(path).write_text(text + "\n")


def load_model(path) -> EbmModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(doc)
