"""Atomic file writing helpers.

Commands must never leave partial outputs behind: writers emit to a
temporary file in the target directory and rename into place on success.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from pathlib import Path


@contextmanager
def atomic_write(path, mode="w", encoding="utf-8", newline=""):
    """Open a temp file next to ``path``, rename over it when the block succeeds."""
    path = Path(path)
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    try:
        with open(tmp, mode, encoding=encoding, newline=newline) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def write_json(obj, path):
    """Serialize ``obj`` deterministically (sorted keys, trailing newline)."""
    with atomic_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
