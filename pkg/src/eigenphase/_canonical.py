"""Canonical JSON (sorted keys, 17 significant digits) and content hashing."""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("non-finite float in canonical JSON")
    if x == 0.0:
        return "0.0"
    return format(x, ".17g")


def canonical_json(obj: Any) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(json.dumps(k) + ":" + canonical_json(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return canonical_json(obj.item())
    raise TypeError(f"cannot canonicalize {type(obj).__name__}")


def content_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
