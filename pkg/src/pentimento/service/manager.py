"""Job lifecycle: FIFO queue, worker pool, cancellation, crash recovery.

States move only forward: queued -> running -> done | failed | cancelled
(a queued job may be cancelled or failed directly). Exactly one worker
mutates a given job; readers always get a consistent copy taken under
the manager lock. Every mutation is persisted through the job store's
atomic writes, so a restarted service finds completed jobs intact and
marks anything that was in flight as failed ("interrupted").
"""

from __future__ import annotations

import os
import queue
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path

from ..errors import ConfigError, PentimentoError
from ..reconstruct import ReconstructionConfig, run
from .store import AssetStore, JobStore

QUEUED, RUNNING, DONE, FAILED, CANCELLED = (
    "queued",
    "running",
    "done",
    "failed",
    "cancelled",
)
_ALLOWED = {
    QUEUED: {RUNNING, CANCELLED, FAILED},
    RUNNING: {DONE, FAILED, CANCELLED},
    DONE: set(),
    FAILED: set(),
    CANCELLED: set(),
}

_WIRE_FIELDS = {
    "content_asset",
    "style_asset",
    "mask_asset",
    "weights_path",
    "size",
    "loss",
    "optimizer",
    "init",
    "seed",
}


class AssetMissing(PentimentoError):
    """A job config referenced an asset id that is not in the store."""

    def __init__(self, field: str, asset_id: str):
        super().__init__(f"unknown asset {asset_id!r} referenced by {field!r}")
        self.field = field


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def default_worker_count() -> int:
    env = os.environ.get("PENTIMENTO_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, (os.cpu_count() or 2) // 2)


class JobManager:
    """Owns the queue, the workers and the persisted job records."""

    def __init__(self, store_root, workers: int | None = None, run_fn=run):
        self.assets = AssetStore(store_root)
        self.jobs_store = JobStore(store_root)
        self._run = run_fn
        self._lock = threading.Lock()
        self._jobs: dict[str, dict] = {}
        self._cancel_events: dict[str, threading.Event] = {}
        self._queue: queue.Queue = queue.Queue()
        self._recover()
        count = workers if workers is not None else default_worker_count()
        self._workers = [
            threading.Thread(target=self._worker_loop, daemon=True, name=f"worker-{i}")
            for i in range(count)
        ]
        for w in self._workers:
            w.start()

    # -- lifecycle ---------------------------------------------------------

    def _recover(self) -> None:
        """Reload persisted jobs; anything non-terminal was interrupted."""
        for job_id in self.jobs_store.list_ids():
            job = self.jobs_store.read(job_id)
            if job is None:
                continue
            if job["state"] in (QUEUED, RUNNING):
                job["state"] = FAILED
                job["error"] = {"code": "interrupted", "message": "interrupted"}
                job["updated_at"] = _now()
                self.jobs_store.write(job_id, job)
            self._jobs[job_id] = job

    def shutdown(self) -> None:
        for _ in self._workers:
            self._queue.put(None)
        for w in self._workers:
            w.join(timeout=30)

    # -- public operations --------------------------------------------------

    def submit(self, wire: dict) -> dict:
        """Validate a job config against the asset store and enqueue it."""
        self._validate_wire(wire)
        job_id = str(uuid.uuid4())
        job_dir = self.jobs_store.create(job_id)
        # Raises ConfigError / AssetMissing before anything is queued.
        self._build_config(wire, job_dir)
        job = {
            "id": job_id,
            "state": QUEUED,
            "config": wire,
            "progress": {"iteration": 0, "losses": None},
            "snapshots": [],
            "error": None,
            "created_at": _now(),
            "updated_at": _now(),
        }
        with self._lock:
            self._jobs[job_id] = job
            self._cancel_events[job_id] = threading.Event()
            self.jobs_store.write(job_id, job)
        self._queue.put(job_id)
        return dict(job)

    def get(self, job_id: str) -> dict | None:
        with self._lock:
            job = self._jobs.get(job_id)
            return dict(job) if job else None

    def cancel(self, job_id: str) -> dict | None:
        """Request cooperative cancellation; queued jobs cancel immediately."""
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                return None
            event = self._cancel_events.get(job_id)
            if event is not None:
                event.set()
            if job["state"] == QUEUED:
                self._transition(job, CANCELLED)
            return dict(job)

    def snapshot_file(self, job_id: str, index: int) -> Path | None:
        if self.get(job_id) is None:
            return None
        paths = self.jobs_store.snapshot_paths(job_id)
        if index < 0 or index >= len(paths):
            return None
        return paths[index]

    # -- internals -----------------------------------------------------------

    def _validate_wire(self, wire: dict) -> None:
        if not isinstance(wire, dict):
            raise ConfigError("job config must be a JSON object")
        for key in wire:
            if key not in _WIRE_FIELDS:
                raise ConfigError(f"unknown config field {key!r}", field=key)
        for field in ("content_asset", "style_asset"):
            asset_id = wire.get(field)
            if not asset_id:
                raise ConfigError(f"missing required field {field!r}", field=field)
            if not self.assets.exists(str(asset_id)):
                raise AssetMissing(field, str(asset_id))
        mask = wire.get("mask_asset")
        if mask and not self.assets.exists(str(mask)):
            raise AssetMissing("mask_asset", str(mask))
        weights = wire.get("weights_path")
        if not weights:
            raise ConfigError(
                "missing required field 'weights_path'", field="weights_path"
            )
        if not Path(str(weights)).is_file():
            raise ConfigError(
                f"weights file not found: {weights}", field="weights_path"
            )

    def _build_config(self, wire: dict, job_dir: Path) -> ReconstructionConfig:
        mask = wire.get("mask_asset")
        data = {
            "content_path": str(self.assets.path(str(wire["content_asset"]))),
            "style_path": str(self.assets.path(str(wire["style_asset"]))),
            "mask_path": str(self.assets.path(str(mask))) if mask else None,
            "weights_path": str(wire["weights_path"]),
            "output_dir": str(job_dir),
            "size": wire.get("size", 512),
            "loss": wire.get("loss") or {},
            "optimizer": wire.get("optimizer") or {},
            "init": wire.get("init", "content"),
            "seed": wire.get("seed", 0),
        }
        return ReconstructionConfig.from_dict(data)

    def _transition(self, job: dict, new_state: str) -> None:
        """Move a job forward; persists. Caller must hold the lock."""
        current = job["state"]
        if new_state not in _ALLOWED[current]:
            raise PentimentoError(f"illegal transition {current} -> {new_state}")
        job["state"] = new_state
        job["updated_at"] = _now()
        self.jobs_store.write(job["id"], job)

    def _worker_loop(self) -> None:
        while True:
            job_id = self._queue.get()
            if job_id is None:
                return
            with self._lock:
                job = self._jobs.get(job_id)
                if job is None or job["state"] != QUEUED:
                    continue  # cancelled while queued
                self._transition(job, RUNNING)
                event = self._cancel_events[job_id]
            self._execute(job_id, event)

    def _execute(self, job_id: str, cancel_event: threading.Event) -> None:
        job_dir = self.jobs_store.job_dir(job_id)

        def on_progress(iteration, breakdown):
            with self._lock:
                job = self._jobs[job_id]
                job["progress"] = {
                    "iteration": iteration,
                    "losses": {
                        "total": breakdown.total,
                        "content": breakdown.content,
                        "style": breakdown.style,
                        "tv": breakdown.tv,
                    },
                }
                job["snapshots"] = [
                    p.name for p in self.jobs_store.snapshot_paths(job_id)
                ]
                job["updated_at"] = _now()
                self.jobs_store.write(job_id, job)

        try:
            with self._lock:
                config = self._build_config(self._jobs[job_id]["config"], job_dir)
            self._run(
                config,
                progress=on_progress,
                should_stop=cancel_event.is_set,
            )
            with self._lock:
                job = self._jobs[job_id]
                job["snapshots"] = [
                    p.name for p in self.jobs_store.snapshot_paths(job_id)
                ]
                self._transition(job, CANCELLED if cancel_event.is_set() else DONE)
        except Exception as exc:  # failure is a job outcome, not a crash
            with self._lock:
                job = self._jobs[job_id]
                job["error"] = {"code": "run_failed", "message": str(exc)}
                self._transition(job, FAILED)
