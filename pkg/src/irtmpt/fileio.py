"""Serialization helpers: 17-significant-digit numbers, stable JSON, atomic writes."""

from __future__ import annotations

import json
import os
import tempfile
from typing import Any

import numpy as np

from .errors import DataFormatError


def fmt(x: float) -> str:
    """Render a float with 17 significant digits (lossless double round-trip)."""
    return format(float(x), ".17g")


def _render(obj: Any, indent: int) -> str:
    pad = " " * indent
    pad_in = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad_in}"{k}": {_render(v, indent + 2)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj.tolist()) if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            return "[]"
        rendered = [_render(v, indent + 2) for v in seq]
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)
        if flat and sum(len(r) for r in rendered) < 100:
            return "[" + ", ".join(rendered) + "]"
        return "[\n" + ",\n".join(pad_in + r for r in rendered) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def to_json(obj: Any) -> str:
    """Deterministic JSON text with 17-significant-digit floats, trailing newline."""
    return _render(obj, 0) + "\n"


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the target directory plus rename; no partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: str) -> Any:
    try:
        with open(path, "r") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def require(obj: dict, key: str, context: str) -> Any:
    if key not in obj:
        raise DataFormatError(f"{context}: missing field {key!r}")
    return obj[key]


def as_float_array(value: Any, length: int, context: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (length,):
        raise DataFormatError(f"{context}: expected {length} numbers, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataFormatError(f"{context}: non-finite value")
    return arr
