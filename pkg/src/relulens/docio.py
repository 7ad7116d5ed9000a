"""Canonical JSON documents and atomic file writes.

Every on-disk artifact goes through ``canonical_dumps`` so that identical
inputs produce byte-identical files (sorted keys, repr floats, LF endings).
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile


def canonical_dumps(doc) -> str:
    """Serialize a JSON-able document deterministically."""
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_of_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_text_atomic(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over the target."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path, doc) -> None:
    write_text_atomic(path, canonical_dumps(doc))


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
