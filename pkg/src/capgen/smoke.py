"""Client side of the sandbox-runner protocol.

The runner is an external script executed as a child process: one JSON
request on stdin, one JSON report on stdout, logs on stderr. The parent
enforces the wall-clock bound and synthesizes a TIMEOUT report when the
child has to be killed. Nothing in here imports the tensor framework.
"""

import json
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

PROTOCOL_SCHEMA = 1

SMOKE_PASS = "PASS"
SMOKE_IMPORT_FAIL = "IMPORT_FAIL"
SMOKE_RUNTIME_FAIL = "RUNTIME_FAIL"
SMOKE_SHAPE_VIOLATION = "SHAPE_VIOLATION"
SMOKE_DIVERGED = "DIVERGED"
SMOKE_TIMEOUT = "TIMEOUT"

SMOKE_STATUSES = (
    SMOKE_PASS, SMOKE_IMPORT_FAIL, SMOKE_RUNTIME_FAIL,
    SMOKE_SHAPE_VIOLATION, SMOKE_DIVERGED, SMOKE_TIMEOUT,
)


@dataclass(frozen=True)
class SmokeRequest:
    source_text: str
    in_shape: tuple[int, int, int, int] = (2, 3, 64, 64)
    vocab_size: int = 64
    caption_len: int = 8
    steps: int = 2
    timeout_s: float = 120.0
    lr: float = 1e-3
    momentum: float = 0.9

    def __post_init__(self):
        if self.in_shape[0] < 1:
            raise ValueError("batch size must be >= 1")
        if self.caption_len < 2:
            raise ValueError("caption_len must be >= 2")
        if self.vocab_size < 4:
            raise ValueError("vocab_size must be >= 4")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")

    def to_wire(self) -> dict:
        return {
            "schema": PROTOCOL_SCHEMA,
            "source_text": self.source_text,
            "in_shape": list(self.in_shape),
            "vocab_size": self.vocab_size,
            "caption_len": self.caption_len,
            "steps": self.steps,
            "timeout_s": self.timeout_s,
            "prm": {"lr": self.lr, "momentum": self.momentum},
        }


@dataclass(frozen=True)
class SmokeReport:
    status: str
    logits_shape: tuple[int, ...] | None = None
    losses: tuple[float, ...] = field(default_factory=tuple)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status == SMOKE_PASS


def runner_command(runner_path) -> list[str]:
    """Child invocation for a runner script path."""
    return [sys.executable, str(Path(runner_path))]


def run_smoke(request: SmokeRequest, runner_cmd: list[str]) -> SmokeReport:
    """Execute one smoke run in a child process; never raises for candidate faults."""
    try:
        proc = subprocess.Popen(
            runner_cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except OSError as exc:
        return SmokeReport(SMOKE_RUNTIME_FAIL, message=f"cannot start runner: {exc}")
    try:
        stdout, stderr = proc.communicate(json.dumps(request.to_wire()), timeout=request.timeout_s)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.communicate()
        return SmokeReport(SMOKE_TIMEOUT, message=f"killed after {request.timeout_s}s")

    if proc.returncode != 0:
        tail = stderr.strip().splitlines()[-5:]
        return SmokeReport(
            SMOKE_RUNTIME_FAIL,
            message=f"runner exited {proc.returncode}: " + " | ".join(tail),
        )
    try:
        payload = json.loads(stdout)
        if payload.get("schema") != PROTOCOL_SCHEMA:
            raise ValueError(f"schema {payload.get('schema')!r} != {PROTOCOL_SCHEMA}")
        status = payload["status"]
        if status not in SMOKE_STATUSES:
            raise ValueError(f"unknown status {status!r}")
    except (ValueError, KeyError, TypeError) as exc:
        return SmokeReport(SMOKE_RUNTIME_FAIL, message=f"protocol error: {exc}")
    shape = payload.get("logits_shape")
    return SmokeReport(
        status=status,
        logits_shape=None if shape is None else tuple(shape),
        losses=tuple(float(v) for v in payload.get("losses", [])),
        message=payload.get("message", ""),
    )


def probe_runner(runner_cmd: list[str], timeout_s: float = 60.0) -> dict:
    """Capability report from the runner; {'available': False, ...} on any failure."""
    try:
        proc = subprocess.run(
            runner_cmd + ["--probe"],
            capture_output=True,
            text=True,
            timeout=timeout_s,
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        return {"available": False, "error": str(exc)}
    if proc.returncode != 0:
        return {"available": False, "error": f"probe exited {proc.returncode}"}
    try:
        report = json.loads(proc.stdout)
    except ValueError as exc:
        return {"available": False, "error": f"probe protocol error: {exc}"}
    report.setdefault("available", False)
    return report
