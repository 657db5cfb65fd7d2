"""Run manifests: append-only reproducibility records written next to every
pipeline artifact."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

from .rng import fnv1a64

MANIFEST_NAME = "manifest.json"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(params: dict) -> str:
    canon = json.dumps(params, sort_keys=True, ensure_ascii=False)
    return f"{fnv1a64(canon.encode('utf-8')):016x}"


def append_run(out_dir, command: str, params: dict, seeds=None, counts=None,
               inputs=None, artifacts=None) -> dict:
    """Append one run entry to <out_dir>/manifest.json and return it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_NAME
    entry = {
        "command": command,
        "config_hash": config_hash(params),
        "params": params,
        "seeds": seeds or {},
        "counts": counts or {},
        "inputs": {str(p): file_digest(p) for p in (inputs or []) if Path(p).exists()},
        "artifacts": [str(a) for a in (artifacts or [])],
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    doc = {"runs": []}
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    doc["runs"].append(entry)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    return entry
