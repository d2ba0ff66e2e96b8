"""On-disk job registry with a bounded worker pool.

Job records are single JSON files written atomically (temp file + rename), so
a crash can never leave a half-written record; on startup, jobs that were
queued or running under a previous process are marked failed. State
transitions are monotone: queued -> running -> succeeded | failed.
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

from mrpkit.pipeline.manifest import now_iso

_ORDER = {"queued": 0, "running": 1, "succeeded": 2, "failed": 2}


class JobRegistry:
    def __init__(self, root: str | Path, workers: int = 2):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=workers)
        self.recover()

    # -- persistence ----------------------------------------------------------

    def _path(self, job_id: str) -> Path:
        return self.root / f"{job_id}.json"

    def _write(self, record: dict) -> None:
        path = self._path(record["id"])
        tmp = path.with_suffix(f".{uuid.uuid4().hex}.tmp")
        tmp.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        tmp.replace(path)

    def get(self, job_id: str) -> dict | None:
        path = self._path(job_id)
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def all_jobs(self) -> list[dict]:
        return [json.loads(p.read_text()) for p in sorted(self.root.glob("*.json"))]

    # -- lifecycle -------------------------------------------------------------

    def recover(self) -> int:
        """Mark jobs owned by a dead process as failed; artifacts stay parseable."""
        interrupted = 0
        for record in self.all_jobs():
            if record["state"] in ("queued", "running"):
                record["state"] = "failed"
                record["error"] = "interrupted by service restart"
                record["updated"] = now_iso()
                self._write(record)
                interrupted += 1
        return interrupted

    def submit(
        self,
        kind: str,
        runner: Callable[[Callable[[dict], None]], None],
        dataset_id: str | None = None,
        fit_id: str | None = None,
    ) -> str:
        job_id = uuid.uuid4().hex[:12]
        record = {
            "id": job_id,
            "kind": kind,
            "state": "queued",
            "progress": {},
            "error": None,
            "dataset_id": dataset_id,
            "fit_id": fit_id,
            "created": now_iso(),
            "updated": now_iso(),
        }
        with self._lock:
            self._write(record)
        self._executor.submit(self._run, job_id, runner)
        return job_id

    def _transition(self, job_id: str, state: str, **fields) -> None:
        with self._lock:
            record = self.get(job_id)
            if record is None:
                return
            if _ORDER[state] < _ORDER[record["state"]]:
                return  # never move backwards
            if record["state"] in ("succeeded", "failed"):
                return  # terminal states immutable
            record["state"] = state
            record.update(fields)
            record["updated"] = now_iso()
            self._write(record)

    def update_progress(self, job_id: str, progress: dict) -> None:
        with self._lock:
            record = self.get(job_id)
            if record is None or record["state"] not in ("running",):
                return
            record["progress"] = progress
            record["updated"] = now_iso()
            self._write(record)

    def _run(self, job_id: str, runner) -> None:
        self._transition(job_id, "running")

        def report(progress: dict) -> None:
            self.update_progress(job_id, progress)

        try:
            runner(report)
        except Exception as exc:  # noqa: BLE001 - job failures become state
            self._transition(job_id, "failed", error=f"{type(exc).__name__}: {exc}")
            return
        self._transition(job_id, "succeeded", progress={})

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True)
