"""CSV, JSON and manifest writers for run artifacts."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .checkpoint import sha256_file
from .errors import CheckpointError


def _cell(v):
    # csv writes floats with repr(), which round-trips f64 exactly
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path, header, rows):
    """RFC-4180 CSV (CRLF line ends, minimal quoting) with a header row."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _finite(obj):
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_json(path, payload):
    path = Path(path)
    path.write_text(json.dumps(_finite(payload), indent=2, default=_json_default) + "\n", encoding="utf-8")
    return path


def write_json_atomic(path, payload):
    """Write JSON through a temporary file in the same directory, then rename."""
    path = Path(path)
    text = json.dumps(_finite(payload), indent=2, default=_json_default) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def file_entries(root, paths):
    """Manifest file list: path relative to ``root``, size and sha256."""
    root = Path(root)
    out = []
    for p in sorted(Path(p) for p in paths):
        out.append({"path": p.relative_to(root).as_posix(), "bytes": p.stat().st_size, "sha256": sha256_file(p)})
    return out


def verify_manifest(path):
    """Re-hash every file listed in a manifest.  Returns a list of problems (empty when intact)."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read manifest {path}: {exc}") from exc
    root = path.parent
    problems = []
    for entry in manifest.get("files", []):
        f = root / entry["path"]
        if not f.exists():
            problems.append(f"missing: {entry['path']}")
        elif sha256_file(f) != entry["sha256"]:
            problems.append(f"hash mismatch: {entry['path']}")
    return problems
