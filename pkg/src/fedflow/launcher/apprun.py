"""How a launcher actually executes one job on its assigned nodes.

The launcher core is execution-agnostic: it talks to an AppRun backend that
spawns something, answers polls, and can be told to stop. The process backend
here runs the rendered command as a local subprocess; the simulator supplies
its own backend with virtual exit times.
"""

from __future__ import annotations

import os
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from fedflow.core.appspec import render_command
from fedflow.core.records import AppSpec, JobRecord


class SpawnError(Exception):
    """Raised when a run cannot be started at all."""


@dataclass(frozen=True)
class RunStatus:
    done: bool
    returncode: int | None = None
    finished_at: float | None = None
    error: str | None = None


class AppRun(Protocol):
    def spawn(self, job: JobRecord, app: AppSpec, node_ids: list[int]) -> object: ...

    def poll(self, handle: object) -> RunStatus: ...

    def terminate(self, handle: object) -> None: ...


@dataclass
class _ProcessHandle:
    proc: subprocess.Popen
    workdir: Path
    app: AppSpec
    job: JobRecord
    log: object


class LocalProcessAppRun:
    """Runs jobs as subprocesses under ``data_root/<workdir>``.

    stdout and stderr land in ``job.out`` inside the working directory. On a
    zero exit, files matching the app's cleanup globs are removed, except
    paths claimed by outbound transfer slots, which must survive until
    stage-out picks them up.
    """

    def __init__(self, data_root: str | Path):
        self.data_root = Path(data_root)

    def spawn(self, job: JobRecord, app: AppSpec, node_ids: list[int]) -> _ProcessHandle:
        workdir = self.data_root / job.workdir
        workdir.mkdir(parents=True, exist_ok=True)
        command = render_command(app, job.parameters)
        env = dict(os.environ)
        env.update(app.environment)
        env["FEDFLOW_JOB_ID"] = str(job.job_id)
        env["FEDFLOW_NODE_IDS"] = ",".join(str(n) for n in node_ids)
        log = open(workdir / "job.out", "ab")
        try:
            proc = subprocess.Popen(
                shlex.split(command),
                cwd=workdir,
                env=env,
                stdout=log,
                stderr=subprocess.STDOUT,
            )
        except OSError as exc:
            log.close()
            raise SpawnError(f"job {job.job_id}: {exc}") from exc
        return _ProcessHandle(proc=proc, workdir=workdir, app=app, job=job, log=log)

    def poll(self, handle: _ProcessHandle) -> RunStatus:
        rc = handle.proc.poll()
        if rc is None:
            return RunStatus(done=False)
        handle.log.close()
        if rc == 0:
            self._cleanup(handle)
        return RunStatus(done=True, returncode=rc)

    def terminate(self, handle: _ProcessHandle) -> None:
        if handle.proc.poll() is None:
            handle.proc.terminate()
            try:
                handle.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                handle.proc.kill()
                handle.proc.wait()
        handle.log.close()

    def _cleanup(self, handle: _ProcessHandle) -> None:
        protected = {
            slot.local_path
            for slot in handle.app.transfer_slots.values()
            if slot.direction == "out"
        }
        for pattern in handle.app.cleanup_files:
            for path in sorted(handle.workdir.glob(pattern)):
                rel = str(path.relative_to(handle.workdir))
                if rel in protected:
                    continue
                if path.is_file():
                    path.unlink()
