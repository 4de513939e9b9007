"""Shared helpers for driving the worker process from tests."""
from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

DATA_DIR = Path(__file__).parent / "data"

WORKER_CMD = [sys.executable, "-m", "sandbox_worker"]

RESPONSE_KEYS = {
    "status",
    "returned",
    "stdout",
    "stderr",
    "error_type",
    "traceback",
    "wall_time_s",
}


def call_worker_raw(
    stdin_text: str, *, timeout: float = 120.0, env_overrides: dict | None = None
) -> subprocess.CompletedProcess:
    env = {**os.environ, **env_overrides} if env_overrides else None
    return subprocess.run(
        WORKER_CMD,
        input=stdin_text,
        capture_output=True,
        text=True,
        timeout=timeout,
        env=env,
    )


def call_worker(
    request: dict, *, timeout: float = 120.0, env_overrides: dict | None = None
) -> dict:
    proc = call_worker_raw(
        json.dumps(request) + "\n", timeout=timeout, env_overrides=env_overrides
    )
    assert proc.returncode == 0, f"worker exited {proc.returncode}: {proc.stderr}"
    lines = [line for line in proc.stdout.splitlines() if line.strip()]
    assert len(lines) == 1, f"expected exactly one response line, got {lines!r}"
    response = json.loads(lines[0])
    assert RESPONSE_KEYS <= set(response), f"response missing keys: {response}"
    return response


def run_program(
    code: str,
    *,
    entry: str | None = None,
    timeout_s: float = 30.0,
    memory_mb: int = 512,
    capture_limit_bytes: int = 65536,
    env_overrides: dict | None = None,
) -> dict:
    return call_worker(
        {
            "code": code,
            "entry": entry,
            "timeout_s": timeout_s,
            "memory_mb": memory_mb,
            "capture_limit_bytes": capture_limit_bytes,
        },
        env_overrides=env_overrides,
    )


def load_program(name: str) -> str:
    return (DATA_DIR / name).read_text(encoding="utf-8")
