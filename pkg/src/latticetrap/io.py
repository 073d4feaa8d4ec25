"""Deterministic CSV and JSON output with embedded configuration and content hashes."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["to_jsonable", "dumps_json", "write_json", "read_json", "write_csv", "read_csv", "sha256_text"]


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become null."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "value"):  # enums
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(payload, config: dict | None = None) -> str:
    """Payload with the run configuration and a hash of both.

    Floats use Python's shortest round-trip repr (at most 17 significant
    digits), so values survive a reload bit for bit.
    """
    body = {"config": to_jsonable(config or {}), "data": to_jsonable(payload)}
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    body["sha256"] = sha256_text(canon)
    return json.dumps(body, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, payload, config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(payload, config), encoding="utf-8")
    return path


def read_json(path, verify: bool = True) -> dict:
    body = json.loads(Path(path).read_text(encoding="utf-8"))
    if verify:
        digest = body.pop("sha256", None)
        canon = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
        if digest != sha256_text(canon):
            raise ValueError(f"{path}: content hash mismatch")
        body["sha256"] = digest
    return body


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".9g")
    return str(v)


def write_csv(path, columns, rows, config: dict | None = None, meta: dict | None = None) -> Path:
    """CSV with '#' header lines: config JSON, extra metadata, and a hash of the table body."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row length does not match the header")
        w.writerow([_fmt(v) for v in row])
    body = buf.getvalue()
    head = [f"# config: {json.dumps(to_jsonable(config or {}), sort_keys=True, separators=(',', ':'))}"]
    for k in sorted(meta or {}):
        head.append(f"# {k}: {json.dumps(to_jsonable(meta[k]), sort_keys=True, separators=(',', ':'))}")
    head.append(f"# sha256: {sha256_text(body)}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(head) + "\n" + body, encoding="utf-8")
    return path


def read_csv(path, verify: bool = True):
    """(meta, columns, rows); numeric cells parsed to float, others kept as text."""
    meta = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines(keepends=True)
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        key, _, val = lines[k][1:].strip().partition(": ")
        meta[key] = val if key == "sha256" else json.loads(val)
        k += 1
    body = "".join(lines[k:])
    if verify and meta.get("sha256") != sha256_text(body):
        raise ValueError(f"{path}: content hash mismatch")
    reader = csv.reader(io.StringIO(body))
    columns = next(reader, [])
    rows = []
    for rec in reader:
        out = []
        for cell in rec:
            try:
                out.append(float(cell))
            except ValueError:
                out.append(cell)
        rows.append(out)
    return meta, columns, rows
