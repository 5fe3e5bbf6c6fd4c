"""In-process job queue for long-running solves.

Job lifecycle is monotone: queued -> running -> {done, failed, infeasible,
cancelled}; there are no backward transitions. Each job mutates only its own
state under the manager's lock; results are published as immutable models.
"""

from __future__ import annotations

import threading
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

_TERMINAL = ("done", "failed", "infeasible", "cancelled")
_ORDER = {"queued": 0, "running": 1, "done": 2, "failed": 2, "infeasible": 2, "cancelled": 2}


class JobError(ValueError):
    pass


@dataclass
class Job:
    job_id: str
    status: str = "queued"
    progress: dict = field(default_factory=dict)
    result_model_id: str | None = None
    error: str | None = None
    infeasible_witnesses: tuple[str, ...] = ()
    cancel_event: threading.Event = field(default_factory=threading.Event)

    def snapshot(self) -> dict:
        body = {
            "job_id": self.job_id,
            "status": self.status,
            "progress": dict(self.progress),
            "result_model_id": self.result_model_id,
            "error": self.error,
        }
        if self.infeasible_witnesses:
            body["infeasible_witnesses"] = list(self.infeasible_witnesses)
        return body


class JobManager:
    """Single executor with bounded parallelism; poll jobs by id."""

    def __init__(self, parallelism: int = 2):
        self._executor = ThreadPoolExecutor(max_workers=max(parallelism, 1))
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def submit(self, work: Callable[[Job], None]) -> Job:
        """Queue ``work``; it receives the Job and must set done/failed/infeasible."""
        with self._lock:
            self._counter += 1
            job = Job(job_id=f"job-{self._counter}")
            self._jobs[job.job_id] = job

        def run() -> None:
            if not self.transition(job, "running"):
                return  # cancelled while queued
            try:
                work(job)
            except Exception:
                with self._lock:
                    if job.status not in _TERMINAL:
                        job.error = traceback.format_exc(limit=3)
                        job.status = "failed"

        self._executor.submit(run)
        return job

    def transition(self, job: Job, status: str) -> bool:
        """Monotone transition; returns False if the job already moved past it."""
        with self._lock:
            if _ORDER[status] <= _ORDER[job.status] and status != job.status:
                return False
            if job.status in _TERMINAL:
                return False
            job.status = status
            return True

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def cancel(self, job_id: str) -> Job:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise KeyError(job_id)
            if job.status in _TERMINAL:
                raise JobError(f"job {job_id} already finished ({job.status})")
            job.cancel_event.set()
            job.status = "cancelled"
            return job

    def wait(self, job_id: str, timeout: float = 120.0) -> Job:
        """Poll until the job reaches a terminal state (for CLI/test use)."""
        import time
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            job = self.get(job_id)
            if job is None:
                raise KeyError(job_id)
            if job.status in _TERMINAL:
                return job
            time.sleep(0.01)
        raise TimeoutError(f"job {job_id} did not finish within {timeout}s")

    def shutdown(self) -> None:
        self._executor.shutdown(wait=False, cancel_futures=True)
