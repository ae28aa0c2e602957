"""Parameter files: a JSON manifest plus a little-endian float64 blob.

Layout: ``CTXRL1\\n`` magic, 8-byte LE header length, UTF-8 JSON header, raw
blob.  The header records (name, shape, offset) per array, arbitrary JSON
metadata, and the blob's SHA-256, so truncation or corruption is detected
before any state is handed back.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CTXRL1\n"


class IntegrityError(IOError):
    """File is truncated, corrupt, or not a parameter file."""


def save_params(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.size
    blob = b"".join(chunks)
    header = {
        "version": 1,
        "meta": meta or {},
        "entries": entries,
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(hbytes)))
        f.write(hbytes)
        f.write(blob)


def load_params(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read arrays and metadata back; raises IntegrityError on any damage."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise IntegrityError(f"{path}: not a CTXRL1 parameter file")
    hlen = struct.unpack("<Q", raw[len(MAGIC) : len(MAGIC) + 8])[0]
    body = len(MAGIC) + 8
    if len(raw) < body + hlen:
        raise IntegrityError(f"{path}: truncated header")
    try:
        header = json.loads(raw[body : body + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise IntegrityError(f"{path}: unreadable header ({e})") from e
    blob = raw[body + hlen :]
    if hashlib.sha256(blob).hexdigest() != header.get("blob_sha256"):
        raise IntegrityError(f"{path}: blob checksum mismatch")
    arrays = {}
    for ent in header["entries"]:
        shape = tuple(ent["shape"])
        n = int(np.prod(shape)) if shape else 1
        start = ent["offset"] * 8
        seg = blob[start : start + n * 8]
        if len(seg) != n * 8:
            raise IntegrityError(f"{path}: blob too short for {ent['name']!r}")
        arrays[ent["name"]] = np.frombuffer(seg, dtype="<f8").reshape(shape).copy()
    return arrays, header["meta"]
