"""LENSW1 weight files: one JSON document holding config and every named array."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, InputError
from .model import ModelConfig, WeightSet, weights_from_params

FORMAT_TAG = "LENSW1"


def dumps_weights(w: WeightSet) -> str:
    doc = {
        "format": FORMAT_TAG,
        "config": w.config.to_dict(),
        "params": {name: a.tolist() for name, a in w.to_params().items()},
    }
    # Python's float repr is shortest-round-trip, so the file reloads bitwise.
    return json.dumps(doc, separators=(",", ":"))


def loads_weights(text: str) -> WeightSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"weight file is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        tag = doc.get("format") if isinstance(doc, dict) else None
        raise FormatError(f"unsupported weight format tag {tag!r} (expected {FORMAT_TAG!r})")
    if not isinstance(doc.get("config"), dict) or not isinstance(doc.get("params"), dict):
        raise FormatError("weight file needs 'config' and 'params' objects")
    cfg = ModelConfig.from_dict(doc["config"])
    try:
        params = {k: np.asarray(v, dtype=np.float64) for k, v in doc["params"].items()}
    except (TypeError, ValueError) as e:
        raise FormatError(f"ragged or non-numeric parameter array: {e}") from None
    try:
        return weights_from_params(cfg, params)
    except ConfigError as e:
        raise FormatError(str(e)) from None


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_weights(path: str | os.PathLike, w: WeightSet) -> None:
    atomic_write_text(path, dumps_weights(w))


def load_weights(path: str | os.PathLike) -> WeightSet:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read weights {path}: {e}") from None
    return loads_weights(text)
