"""Artifact writers. Every file is written once, atomically, and carries the
config hash: CSV files as a leading ``# config_sha256=`` comment line, JSON
files as a ``config_hash`` field.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd


def atomic_write(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_bytes(df: pd.DataFrame, config_hash: str, notes: Sequence[str] = (), index: bool = False) -> bytes:
    buf = io.StringIO()
    buf.write(f"# config_sha256={config_hash}\n")
    for n in notes:
        buf.write(f"# {n}\n")
    df.to_csv(buf, index=index, na_rep="nan", lineterminator="\n")
    return buf.getvalue().encode()


def write_csv(path, df: pd.DataFrame, config_hash: str, notes: Sequence[str] = (), index: bool = False) -> Path:
    return atomic_write(path, csv_bytes(df, config_hash, notes, index))


def _clean(obj):
    """Recursively convert numpy scalars and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.datetime64, pd.Timestamp, pd.Period)):
        return str(obj)
    return obj


def write_json(path, payload: dict, config_hash: str) -> Path:
    body = {"config_hash": config_hash, **payload}
    text = json.dumps(_clean(body), indent=2, sort_keys=True, allow_nan=False) + "\n"
    return atomic_write(path, text.encode())


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_digest(root) -> dict[str, str]:
    """``relative path -> sha256`` for every file under ``root``."""
    root = Path(root)
    return {str(p.relative_to(root)): file_sha256(p) for p in sorted(root.rglob("*")) if p.is_file()}
