"""Wire-protocol behavior of the worker process, exercised over real stdio."""
from __future__ import annotations

import json
import shutil
import subprocess
import time

import pytest
from workerproto import call_worker, call_worker_raw, run_program


# ---------------------------------------------------------------------------
# returns
# ---------------------------------------------------------------------------


def test_numeric_return():
    response = run_program("def answer():\n    return 6 * 7\n")
    assert response["status"] == "returned"
    assert response["returned"] == 42.0
    assert response["error_type"] is None
    assert response["traceback"] is None
    assert response["wall_time_s"] >= 0.0


def test_none_return_is_null():
    response = run_program("def empty_handed():\n    return None\n")
    assert response["status"] == "returned"
    assert response["returned"] is None


@pytest.mark.parametrize(
    "expression, expected",
    [("7", 7.0), ("True", 1.0), ("-2.5", -2.5)],
)
def test_returns_are_coerced_to_float(expression, expected):
    response = run_program(f"def produce():\n    return {expression}\n")
    assert response["status"] == "returned"
    assert response["returned"] == expected


def test_numpy_scalar_return():
    code = "import numpy as np\n\ndef produce():\n    return np.float64(3.5)\n"
    response = run_program(code)
    assert response["status"] == "returned"
    assert response["returned"] == 3.5


def test_nonfinite_return_is_null_with_note():
    response = run_program("def produce():\n    return float('inf')\n")
    assert response["status"] == "returned"
    assert response["returned"] is None
    assert "non-finite" in response["stderr"]


def test_non_numeric_return_is_null_with_note():
    response = run_program("def produce():\n    return 'twelve'\n")
    assert response["status"] == "returned"
    assert response["returned"] is None
    assert "non-numeric" in response["stderr"]


# ---------------------------------------------------------------------------
# protocol stream integrity
# ---------------------------------------------------------------------------


def test_single_response_line_even_with_chatty_program():
    code = (
        "def chat():\n"
        "    print('{\"status\": \"fake\", \"returned\": 999}')\n"
        "    print('more noise')\n"
        "    return 5\n"
    )
    response = run_program(code)  # call_worker asserts exactly one stdout line
    assert response["status"] == "returned"
    assert response["returned"] == 5.0
    assert '"fake"' in response["stdout"]
    assert "more noise" in response["stdout"]


def test_raw_fd_writes_cannot_corrupt_protocol():
    code = (
        "import os\n"
        "def sneak():\n"
        "    os.write(1, b'{\"status\": \"returned\", \"returned\": 1}\\n')\n"
        "    return 5\n"
    )
    response = run_program(code)
    assert response["status"] == "returned"
    assert response["returned"] == 5.0


def test_console_script_entry_point():
    executable = shutil.which("sandbox-worker")
    assert executable is not None
    request = json.dumps({"code": "def f():\n    return 1\n", "timeout_s": 20})
    proc = subprocess.run(
        [executable], input=request + "\n", capture_output=True, text=True, timeout=120
    )
    assert proc.returncode == 0
    response = json.loads(proc.stdout.strip().splitlines()[-1])
    assert response["returned"] == 1.0


# ---------------------------------------------------------------------------
# exceptions
# ---------------------------------------------------------------------------


def test_exception_reports_type_and_trimmed_traceback():
    response = run_program("def boom():\n    return {}['missing']\n")
    assert response["status"] == "exception"
    assert response["error_type"] == "KeyError"
    assert response["returned"] is None
    trace = response["traceback"]
    assert trace.startswith("Traceback (most recent call last):")
    assert "<generated-code>" in trace
    assert "runtime.py" not in trace
    assert "sandbox_worker" not in trace
    assert trace.rstrip().endswith("KeyError: 'missing'")


EXCEPTION_PROGRAMS = [
    ("NameError", "def go():\n    return undefined_name\n"),
    ("TypeError", "def go():\n    return 1 + 'a'\n"),
    ("ValueError", "def go():\n    raise ValueError('bad input')\n"),
    ("ZeroDivisionError", "def go():\n    return 1 / 0\n"),
    ("KeyError", "def go():\n    return {}['absent']\n"),
    ("IndexError", "def go():\n    return [][0]\n"),
    ("AttributeError", "def go():\n    return (3).upper()\n"),
    ("RuntimeError", "def go():\n    raise RuntimeError('solver failed')\n"),
    ("ImportError", "def go():\n    from math import no_such_name\n"),
    ("RecursionError", "def go():\n    return go()\n"),
]


@pytest.mark.parametrize(
    "expected_type, code", EXCEPTION_PROGRAMS, ids=[name for name, _ in EXCEPTION_PROGRAMS]
)
def test_exception_type_corpus(expected_type, code):
    response = run_program(code)
    assert response["status"] == "exception"
    assert response["error_type"] == expected_type


def test_module_level_exception():
    response = run_program("raise ValueError('broken before any function')\n")
    assert response["status"] == "exception"
    assert response["error_type"] == "ValueError"
    assert "broken before any function" in response["traceback"]


def test_system_exit_is_reported_as_exception():
    response = run_program("import sys\n\ndef quit_early():\n    sys.exit(3)\n")
    assert response["status"] == "exception"
    assert response["error_type"] == "SystemExit"


# ---------------------------------------------------------------------------
# timeouts and limits
# ---------------------------------------------------------------------------


def test_timeout_kills_the_program():
    started = time.monotonic()
    response = run_program(
        "def spin():\n    while True:\n        pass\n    return 1\n", timeout_s=2.0
    )
    elapsed = time.monotonic() - started
    assert response["status"] == "timeout"
    assert response["returned"] is None
    assert elapsed < 10.0
    assert response["wall_time_s"] <= elapsed + 0.5


def test_wall_time_reflects_program_runtime():
    code = "import time\n\ndef nap():\n    time.sleep(0.5)\n    return 1\n"
    response = run_program(code)
    assert response["status"] == "returned"
    assert 0.4 <= response["wall_time_s"] < 10.0


def test_memory_limit_triggers_memory_error():
    code = "def hog():\n    data = bytearray(512 * 1024 * 1024)\n    return len(data)\n"
    response = run_program(code, memory_mb=64)
    assert response["status"] == "exception"
    assert response["error_type"] == "MemoryError"


def test_network_access_is_disabled():
    code = (
        "import socket\n\n"
        "def probe():\n"
        "    socket.create_connection(('example.com', 80), timeout=2)\n"
        "    return 1\n"
    )
    response = run_program(code)
    assert response["status"] == "exception"
    assert response["error_type"] == "RuntimeError"
    assert "disabled" in response["traceback"]


def test_capture_limit_truncates_output():
    code = "def chatty():\n    print('x' * 500)\n    return 1\n"
    response = run_program(code, capture_limit_bytes=50)
    assert response["status"] == "returned"
    assert response["stdout"].endswith("... [output truncated]")
    assert response["stdout"].startswith("x" * 50)


def test_stdout_and_stderr_are_captured():
    code = (
        "import sys\n\n"
        "def speak():\n"
        "    print('to stdout')\n"
        "    sys.stderr.write('to stderr\\n')\n"
        "    return 2\n"
    )
    response = run_program(code)
    assert "to stdout" in response["stdout"]
    assert "to stderr" in response["stderr"]


def test_program_runs_in_scratch_directory():
    code = (
        "import os\n\n"
        "def whereami():\n"
        "    print(os.path.basename(os.getcwd()))\n"
        "    with open('scratch.txt', 'w') as sink:\n"
        "        sink.write('hello')\n"
        "    return 1\n"
    )
    response = run_program(code)
    assert response["status"] == "returned"
    assert response["stdout"].startswith("sandbox-")


# ---------------------------------------------------------------------------
# entry resolution
# ---------------------------------------------------------------------------

TWO_FUNCTIONS = (
    "def first():\n"
    "    return 1\n"
    "\n"
    "def second():\n"
    "    return 2\n"
)


def test_entry_can_be_named():
    response = run_program(TWO_FUNCTIONS, entry="first")
    assert response["returned"] == 1.0


def test_entry_defaults_to_last_function_defined():
    response = run_program(TWO_FUNCTIONS)
    assert response["returned"] == 2.0


def test_missing_entry_is_protocol_error():
    response = run_program(TWO_FUNCTIONS, entry="absent")
    assert response["status"] == "protocol"
    assert "absent" in response["stderr"]


def test_code_without_functions_is_protocol_error():
    response = run_program("answer = 42\nprint(answer)\n")
    assert response["status"] == "protocol"
    assert "no function" in response["stderr"]
    assert "42" in response["stdout"]


def test_imported_functions_are_not_entry_candidates():
    code = (
        "def mine():\n"
        "    return 11\n"
        "\n"
        "from json import dumps\n"
    )
    response = run_program(code)
    assert response["returned"] == 11.0


def test_main_guard_does_not_run():
    code = (
        "def quiet():\n"
        "    return 4\n"
        "\n"
        "if __name__ == '__main__':\n"
        "    raise RuntimeError('the main guard must not fire')\n"
    )
    response = run_program(code)
    assert response["status"] == "returned"
    assert response["returned"] == 4.0


# ---------------------------------------------------------------------------
# malformed requests
# ---------------------------------------------------------------------------


def assert_protocol_response(proc: subprocess.CompletedProcess, needle: str):
    assert proc.returncode == 0
    response = json.loads(proc.stdout.strip().splitlines()[-1])
    assert response["status"] == "protocol"
    assert needle in response["stderr"]
    return response


def test_malformed_json_request():
    proc = call_worker_raw("this is not json\n")
    assert_protocol_response(proc, "not valid JSON")


def test_non_object_request():
    proc = call_worker_raw("[1, 2, 3]\n")
    assert_protocol_response(proc, "JSON object")


def test_missing_code_field():
    proc = call_worker_raw("{}\n")
    assert_protocol_response(proc, "'code'")


def test_empty_input():
    proc = call_worker_raw("")
    assert_protocol_response(proc, "empty input")


def test_negative_timeout_rejected():
    response = call_worker({"code": "def f():\n    return 1\n", "timeout_s": -1})
    assert response["status"] == "protocol"
    assert "positive" in response["stderr"]


def test_non_numeric_limit_rejected():
    response = call_worker({"code": "def f():\n    return 1\n", "timeout_s": "soon"})
    assert response["status"] == "protocol"
    assert "numbers" in response["stderr"]


def test_non_string_entry_rejected():
    response = call_worker({"code": "def f():\n    return 1\n", "entry": 7})
    assert response["status"] == "protocol"
    assert "entry" in response["stderr"]
