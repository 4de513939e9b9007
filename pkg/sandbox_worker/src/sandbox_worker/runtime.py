"""Child-process runtime: executes one submitted solver program under limits.

The supervisor (``worker.py``) spawns a fresh interpreter running
:func:`child_main`, pipes the request JSON to its stdin, and reads the result
from the file named by ``result_path`` in the request. Keeping the result out
of the child's stdout means a program that writes garbage to raw file
descriptors cannot corrupt the channel.

Inside the child, in order:

1. solver backend selection (``SANDBOX_SOLVER_BACKEND``) and library preload,
2. chdir into a scratch directory (``SANDBOX_SCRATCH_DIR`` or the system tmp),
3. network access disabled,
4. address-space and CPU limits applied,
5. the submitted code is executed and its entry function called.

Everything the program does — prints, exceptions, return value — is captured
and reported; this module never lets an exception from the submitted code
escape.
"""
from __future__ import annotations

import io
import json
import math
import os
import sys
import tempfile
import time
import traceback
import types

GENERATED_FILENAME = "<generated-code>"
GENERATED_MODULE = "generated_solver"
TRUNCATION_MARKER = "\n... [output truncated]"

#: extra CPU seconds beyond the wall-clock budget before the kernel steps in
CPU_LIMIT_SLACK_S = 5

#: keep at most this many characters of a formatted traceback
TRACEBACK_CAP = 8000


class CappedWriter(io.TextIOBase):
    """A text sink that keeps at most ``limit`` bytes (UTF-8) of what is written."""

    def __init__(self, limit: int):
        super().__init__()
        self.limit = max(0, int(limit))
        self._parts: list[str] = []
        self._size = 0
        self._truncated = False

    def writable(self) -> bool:
        return True

    def write(self, text) -> int:
        if not isinstance(text, str):
            text = str(text)
        length = len(text.encode("utf-8", errors="replace"))
        budget = self.limit - self._size
        if budget >= length:
            self._parts.append(text)
            self._size += length
        elif budget > 0:
            piece = text.encode("utf-8", errors="replace")[:budget].decode(
                "utf-8", errors="ignore"
            )
            self._parts.append(piece)
            self._size = self.limit
            self._truncated = True
        else:
            self._truncated = True
        return len(text)

    def getvalue(self) -> str:
        text = "".join(self._parts)
        if self._truncated:
            return text + TRUNCATION_MARKER
        return text


def install_solver_backend() -> str:
    """Decide what ``import gurobipy`` resolves to inside the child.

    ``SANDBOX_SOLVER_BACKEND`` selects the behaviour:

    * ``auto`` (default) — use a real gurobipy install when present,
      otherwise map the import onto the bundled scipy-backed compat layer;
    * ``gurobipy`` — leave imports alone (a missing install surfaces as an
      ImportError in the submitted program);
    * ``compat`` — always use the compat layer;
    * ``none`` — leave imports alone entirely.
    """
    backend = os.environ.get("SANDBOX_SOLVER_BACKEND", "auto").strip().lower() or "auto"
    if backend in ("none", "gurobipy"):
        return backend
    if backend == "auto":
        try:
            import gurobipy  # noqa: F401

            return "gurobipy"
        except ImportError:
            pass
    elif backend != "compat":
        raise ValueError(f"unknown SANDBOX_SOLVER_BACKEND value: {backend!r}")
    from . import gurobi_compat

    sys.modules["gurobipy"] = gurobi_compat
    return "compat"


def preload_libraries() -> None:
    """Import the heavy numeric stack before memory limits are applied."""
    try:
        import numpy  # noqa: F401
        import scipy.optimize  # noqa: F401
    except ImportError:
        pass


def enter_scratch_directory() -> str:
    base = os.environ.get("SANDBOX_SCRATCH_DIR") or None
    scratch = tempfile.mkdtemp(prefix="sandbox-", dir=base)
    os.chdir(scratch)
    return scratch


def disable_network() -> None:
    import socket

    def refuse(*_args, **_kwargs):
        raise RuntimeError("network access is disabled in the sandbox")

    socket.socket = refuse  # type: ignore[misc]
    socket.create_connection = refuse  # type: ignore[assignment]
    socket.getaddrinfo = refuse  # type: ignore[assignment]


def apply_resource_limits(memory_mb: int, timeout_s: float) -> None:
    """Cap address space (relative to what is already mapped) and CPU time."""
    try:
        import resource
    except ImportError:  # non-POSIX platform; the supervisor timeout still applies
        return
    try:
        page_size = os.sysconf("SC_PAGE_SIZE")
        with open("/proc/self/statm", encoding="ascii") as statm:
            current_vsz = int(statm.read().split()[0]) * page_size
        cap = current_vsz + int(memory_mb) * 1024 * 1024
        resource.setrlimit(resource.RLIMIT_AS, (cap, cap))
    except (OSError, ValueError):
        pass
    try:
        cpu_cap = max(1, int(math.ceil(timeout_s)) + CPU_LIMIT_SLACK_S)
        resource.setrlimit(resource.RLIMIT_CPU, (cpu_cap, cpu_cap))
    except (OSError, ValueError):
        pass
    try:
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
    except (OSError, ValueError):
        pass


def resolve_entry(namespace: dict, entry: str | None):
    """Pick the function to call: the named one, or the last one the code defined."""
    if entry:
        candidate = namespace.get(entry)
        if not callable(candidate):
            return None, f"entry {entry!r} is not a callable defined by the submitted code"
        return candidate, None
    functions = [
        value
        for value in namespace.values()
        if isinstance(value, types.FunctionType) and value.__globals__ is namespace
    ]
    if not functions:
        return None, "the submitted code defines no function to call"
    return functions[-1], None


def coerce_returned(value):
    """Map an arbitrary return value to (float | None, note | None)."""
    if value is None:
        return None, None
    try:
        number = float(value)
    except (TypeError, ValueError):
        return (
            None,
            f"the entry function returned a non-numeric {type(value).__name__}; reported as null",
        )
    if not math.isfinite(number):
        return None, f"the entry function returned a non-finite value ({number}); reported as null"
    return number, None


def format_exception_trimmed(exc: BaseException) -> str:
    """Format a traceback, dropping the harness frames above the submitted code."""
    text = "".join(traceback.format_exception(type(exc), exc, exc.__traceback__))
    lines = text.splitlines(keepends=True)
    for index, line in enumerate(lines):
        if GENERATED_FILENAME in line:
            trimmed = "Traceback (most recent call last):\n" + "".join(lines[index:])
            break
    else:
        trimmed = text
    if len(trimmed) > TRACEBACK_CAP:
        trimmed = "... " + trimmed[-TRACEBACK_CAP:]
    return trimmed


def execute_request(request: dict) -> dict:
    """Run the submitted code and describe what happened. Never raises."""
    code = request.get("code", "")
    entry = request.get("entry")
    limit = int(request.get("capture_limit_bytes", 65536))
    stdout_sink = CappedWriter(limit)
    stderr_sink = CappedWriter(limit)
    result = {
        "status": "protocol",
        "returned": None,
        "stdout": "",
        "stderr": "",
        "error_type": None,
        "traceback": None,
    }
    notes: list[str] = []
    namespace: dict = {"__name__": GENERATED_MODULE, "__builtins__": __builtins__}
    original_stdout, original_stderr = sys.stdout, sys.stderr
    sys.stdout, sys.stderr = stdout_sink, stderr_sink
    try:
        compiled = compile(code, GENERATED_FILENAME, "exec")
        exec(compiled, namespace)
        function, problem = resolve_entry(namespace, entry)
        if function is None:
            notes.append(problem)
        else:
            returned, note = coerce_returned(function())
            result["status"] = "returned"
            result["returned"] = returned
            if note:
                notes.append(note)
    except BaseException as exc:  # noqa: BLE001 — every failure becomes a report
        result["status"] = "exception"
        result["error_type"] = type(exc).__name__
        result["traceback"] = format_exception_trimmed(exc)
    finally:
        sys.stdout, sys.stderr = original_stdout, original_stderr
    result["stdout"] = stdout_sink.getvalue()
    stderr_text = stderr_sink.getvalue()
    if notes:
        joined = "\n".join(notes)
        stderr_text = f"{stderr_text}\n{joined}" if stderr_text else joined
    result["stderr"] = stderr_text
    return result


def child_main() -> None:
    request = json.loads(sys.stdin.read())
    result_path = request["result_path"]
    preload_libraries()
    install_solver_backend()
    enter_scratch_directory()
    disable_network()
    apply_resource_limits(
        int(request.get("memory_mb", 512)), float(request.get("timeout_s", 60.0))
    )
    started = time.monotonic()
    result = execute_request(request)
    result["wall_time_s"] = round(time.monotonic() - started, 6)
    with open(result_path, "w", encoding="utf-8") as sink:
        json.dump(result, sink)
