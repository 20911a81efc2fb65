"""Output files and the run manifest.

All writes go through one :class:`OutputWriter`, which records what it wrote;
the manifest is written last and lists exactly those files.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__


def to_plain(obj):
    """JSON-safe copy: numpy to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


class OutputWriter:
    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[dict] = []

    def _record(self, name: str, data: bytes):
        path = self.dir / name
        path.write_bytes(data)
        self.files.append({"name": name, "bytes": len(data),
                           "sha256": hashlib.sha256(data).hexdigest()})
        return path

    def json(self, name: str, obj):
        text = json.dumps(to_plain(obj), sort_keys=True, indent=2) + "\n"
        return self._record(name, text.encode())

    def text(self, name: str, text: str):
        return self._record(name, text.encode())

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(c) for c in row])
        return self._record(name, buf.getvalue().encode())


def _cell(c):
    if isinstance(c, (bool, np.bool_)):
        return "true" if c else "false"
    if isinstance(c, (float, np.floating)):
        return repr(float(c))
    return c


@dataclass
class RunManifest:
    mode: str
    config_hash: str
    tool_version: str = __version__
    started: str = ""
    finished: str = ""
    files: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    status: str = "ok"
    exit_code: int = 0
    error: dict | None = None
    environment: dict = field(default_factory=dict)

    @staticmethod
    def now() -> str:
        return datetime.now(timezone.utc).isoformat(timespec="seconds")

    def to_json(self) -> dict:
        return {"mode": self.mode, "config_hash": self.config_hash,
                "tool_version": self.tool_version, "started": self.started,
                "finished": self.finished, "files": self.files, "checks": to_plain(self.checks),
                "status": self.status, "exit_code": self.exit_code, "error": self.error,
                "environment": self.environment}

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n")
        return path


def environment() -> dict:
    from .._kernels import USE_NUMBA

    return {"python": platform.python_version(), "numpy": np.__version__,
            "numba": bool(USE_NUMBA)}
