"""Result files: CSV tables with round-trip float text and a checksummed manifest."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path

import numpy as np

MANIFEST_NAME = "manifest.json"


class IntegrityError(Exception):
    """A file listed in a manifest is missing or its checksum differs."""


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        # repr is the shortest string that round-trips, so equal values give equal bytes.
        return repr(float(value))
    return str(value)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class OutputWriter:
    """Writes files under ``root`` and remembers their checksums."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        if not os.access(self.root, os.W_OK):
            raise PermissionError(f"output directory is not writable: {self.root}")
        self.files = {}

    def write_csv(self, relpath, header, rows):
        path = self.root / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        data = csv_text(header, rows).encode("utf-8")
        path.write_bytes(data)
        self.files[Path(relpath).as_posix()] = hashlib.sha256(data).hexdigest()
        return path

    def write_manifest(self, **fields):
        manifest = dict(fields)
        manifest["files"] = dict(sorted(self.files.items()))
        path = self.root / MANIFEST_NAME
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def load_manifest(root):
    path = Path(root) / MANIFEST_NAME
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def verify_manifest(root, manifest):
    """Names of listed files that are missing or whose digest changed."""
    bad = []
    for rel, digest in manifest.get("files", {}).items():
        path = Path(root) / rel
        if not path.is_file() or sha256_file(path) != digest:
            bad.append(rel)
    return bad
