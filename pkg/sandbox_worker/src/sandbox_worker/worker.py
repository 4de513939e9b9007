"""Supervisor: reads one request line from stdin, prints one response line.

Wire protocol (one JSON object per line):

Request fields
    code                 source text of the program to run (required)
    entry                function name to call, or null for the last
                         function the code defines
    timeout_s            wall-clock budget for the program (default 60)
    memory_mb            address-space budget for the program (default 512)
    capture_limit_bytes  cap on captured stdout/stderr (default 65536)

Response fields (always all present)
    status       "returned" | "exception" | "timeout" | "protocol"
    returned     the entry function's numeric return value, or null
    stdout       captured standard output (possibly truncated)
    stderr       captured standard error plus runtime notes
    error_type   exception class name when status == "exception"
    traceback    formatted traceback when status == "exception"
    wall_time_s  measured execution time in seconds

The program itself runs in a separate child interpreter (``runtime.py``)
whose stdout is discarded; results travel through a temporary file, so
nothing the program prints or writes to raw file descriptors can corrupt
the protocol stream. The supervisor owns the wall clock: a child that
outlives its budget is killed as a whole process group.
"""
from __future__ import annotations

import json
import os
import signal
import subprocess
import sys
import tempfile
import time

DEFAULT_TIMEOUT_S = 60.0
DEFAULT_MEMORY_MB = 512
DEFAULT_CAPTURE_LIMIT = 65536

#: allowance on top of timeout_s for interpreter startup and library preload
STARTUP_GRACE_S = 3.0

#: how much child stderr to echo into a failure response
STDERR_TAIL_CHARS = 2000

_CHILD_BOOTSTRAP = "from sandbox_worker.runtime import child_main; child_main()"

_RESPONSE_KEYS = (
    "status",
    "returned",
    "stdout",
    "stderr",
    "error_type",
    "traceback",
    "wall_time_s",
)


def _base_response() -> dict:
    return {
        "status": "protocol",
        "returned": None,
        "stdout": "",
        "stderr": "",
        "error_type": None,
        "traceback": None,
        "wall_time_s": 0.0,
    }


def _tail(text: str | None) -> str:
    if not text:
        return ""
    return text[-STDERR_TAIL_CHARS:]


def parse_request(line: str):
    """Validate one request line. Returns (request, None) or (None, problem)."""
    try:
        data = json.loads(line)
    except json.JSONDecodeError as err:
        return None, f"request is not valid JSON: {err}"
    if not isinstance(data, dict):
        return None, f"request must be a JSON object, got {type(data).__name__}"
    code = data.get("code")
    if not isinstance(code, str) or not code.strip():
        return None, "request field 'code' must be a non-empty string"
    entry = data.get("entry")
    if entry is not None and not isinstance(entry, str):
        return None, "request field 'entry' must be a string or null"
    try:
        timeout_s = float(data.get("timeout_s", DEFAULT_TIMEOUT_S))
        memory_mb = int(data.get("memory_mb", DEFAULT_MEMORY_MB))
        capture_limit = int(data.get("capture_limit_bytes", DEFAULT_CAPTURE_LIMIT))
    except (TypeError, ValueError):
        return None, "request limits must be numbers"
    if timeout_s <= 0 or memory_mb <= 0 or capture_limit <= 0:
        return None, "request limits must be positive"
    return (
        {
            "code": code,
            "entry": entry,
            "timeout_s": timeout_s,
            "memory_mb": memory_mb,
            "capture_limit_bytes": capture_limit,
        },
        None,
    )


def _kill_child(proc: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError, OSError):
        try:
            proc.kill()
        except OSError:
            pass


def _read_result(path: str):
    try:
        with open(path, encoding="utf-8") as source:
            text = source.read()
    except OSError:
        return None
    if not text.strip():
        return None
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        return None
    if not isinstance(data, dict):
        return None
    return data


def run_request(request: dict) -> dict:
    """Execute one validated request in a fresh child interpreter."""
    response = _base_response()
    fd, result_path = tempfile.mkstemp(prefix="sandbox-result-", suffix=".json")
    os.close(fd)
    child_request = dict(request, result_path=result_path)
    started = time.monotonic()
    try:
        try:
            child = subprocess.Popen(
                [sys.executable, "-c", _CHILD_BOOTSTRAP],
                stdin=subprocess.PIPE,
                stdout=subprocess.DEVNULL,
                stderr=subprocess.PIPE,
                text=True,
                start_new_session=True,
            )
        except OSError as err:
            response["stderr"] = f"cannot start the execution child: {err}"
            return response
        budget = request["timeout_s"] + STARTUP_GRACE_S
        try:
            _, child_stderr = child.communicate(json.dumps(child_request), timeout=budget)
        except subprocess.TimeoutExpired:
            _kill_child(child)
            try:
                _, child_stderr = child.communicate(timeout=5.0)
            except (subprocess.TimeoutExpired, ValueError, OSError):
                child_stderr = ""
            response["status"] = "timeout"
            response["stderr"] = _tail(child_stderr)
            response["wall_time_s"] = round(time.monotonic() - started, 6)
            return response
        result = _read_result(result_path)
        if result is None:
            detail = _tail(child_stderr) or "(no stderr)"
            response["stderr"] = (
                f"execution child exited with code {child.returncode} "
                f"without reporting a result: {detail}"
            )
            response["wall_time_s"] = round(time.monotonic() - started, 6)
            return response
        for key in _RESPONSE_KEYS:
            if key in result:
                response[key] = result[key]
        return response
    finally:
        try:
            os.unlink(result_path)
        except OSError:
            pass


def handle_request_line(line: str) -> dict:
    request, problem = parse_request(line)
    if request is None:
        response = _base_response()
        response["stderr"] = f"invalid request: {problem}"
        return response
    return run_request(request)


def main(argv=None) -> int:
    line = sys.stdin.readline()
    if not line.strip():
        response = _base_response()
        response["stderr"] = "invalid request: empty input"
    else:
        response = handle_request_line(line)
    sys.stdout.write(json.dumps(response) + "\n")
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
