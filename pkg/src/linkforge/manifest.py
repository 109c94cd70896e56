"""Atomic file writes and per-run manifests.

Every pipeline stage writes its outputs via a temp-file rename and
records a manifest of parameters plus SHA-256 digests of all inputs and
outputs, so re-runs can be checked for byte-identical results.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def atomic_write_text(path, text: str) -> None:
    """Write text to path via a same-directory temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_lines(path, lines) -> None:
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def write_manifest(stage: str, out_path, params: dict, inputs: list,
                   outputs: list) -> Path:
    """Record a stage run next to its primary output; returns the manifest path."""
    from . import __version__

    manifest = {
        "stage": stage,
        "version": __version__,
        "params": {k: params[k] for k in sorted(params)},
        "inputs": {str(p): sha256_file(p) for p in sorted(map(str, inputs))},
        "outputs": {str(p): sha256_file(p) for p in sorted(map(str, outputs))},
    }
    out_path = Path(out_path)
    manifest_path = out_path.with_name(out_path.name + ".manifest.json")
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
