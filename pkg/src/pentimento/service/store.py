"""Filesystem persistence for the job service.

Assets are content-addressed: ``<root>/assets/<sha256-of-bytes>``. Jobs
live under ``<root>/jobs/<id>/`` as a ``job.json`` plus snapshot PNGs.
All JSON writes go through a temp file and an atomic rename so a crash
never leaves a torn record.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path


def atomic_write_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: Path, payload: dict) -> None:
    atomic_write_bytes(path, json.dumps(payload, indent=2).encode("utf-8"))


class AssetStore:
    """Content-addressed blob store; re-uploading identical bytes is a no-op."""

    def __init__(self, root):
        self.root = Path(root) / "assets"
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes) -> str:
        asset_id = hashlib.sha256(data).hexdigest()
        path = self.root / asset_id
        if not path.exists():
            atomic_write_bytes(path, data)
        return asset_id

    def path(self, asset_id: str) -> Path:
        return self.root / asset_id

    def exists(self, asset_id: str) -> bool:
        return self.path(asset_id).is_file()


class JobStore:
    """One directory per job: job.json plus its snapshots/ folder."""

    def __init__(self, root):
        self.root = Path(root) / "jobs"
        self.root.mkdir(parents=True, exist_ok=True)

    def job_dir(self, job_id: str) -> Path:
        return self.root / job_id

    def create(self, job_id: str) -> Path:
        path = self.job_dir(job_id)
        path.mkdir(parents=True, exist_ok=True)
        (path / "snapshots").mkdir(exist_ok=True)
        return path

    def write(self, job_id: str, payload: dict) -> None:
        atomic_write_json(self.job_dir(job_id) / "job.json", payload)

    def read(self, job_id: str) -> dict | None:
        path = self.job_dir(job_id) / "job.json"
        if not path.is_file():
            return None
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def list_ids(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "job.json").is_file())

    def snapshot_paths(self, job_id: str) -> list[Path]:
        snap_dir = self.job_dir(job_id) / "snapshots"
        if not snap_dir.is_dir():
            return []
        return sorted(snap_dir.glob("iter_*.png"))
