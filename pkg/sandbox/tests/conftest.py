import json
import pathlib
import subprocess
import sys

import pytest

SANDBOX_ROOT = pathlib.Path(__file__).parents[1]
RUNNER = SANDBOX_ROOT / "src" / "capgen_sandbox" / "runner.py"
FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def fixture_source(name: str) -> str:
    return (FIXTURES / f"{name}.py").read_text(encoding="utf-8")


def make_request(source_text, *, in_shape=(2, 3, 32, 32), vocab_size=16,
                 caption_len=6, steps=2, timeout_s=120.0):
    return {
        "schema": 1,
        "source_text": source_text,
        "in_shape": list(in_shape),
        "vocab_size": vocab_size,
        "caption_len": caption_len,
        "steps": steps,
        "timeout_s": timeout_s,
        "prm": {"lr": 1e-3, "momentum": 0.9},
    }


def invoke_runner(request: dict, timeout_s=None):
    """Raw protocol invocation: (returncode, stdout, stderr) or 'TIMEOUT'."""
    proc = subprocess.Popen(
        [sys.executable, str(RUNNER)],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        text=True,
    )
    try:
        out, err = proc.communicate(json.dumps(request),
                                    timeout=timeout_s or request.get("timeout_s", 120.0))
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.communicate()
        return "TIMEOUT", "", ""
    return proc.returncode, out, err


def run_report(request: dict) -> dict:
    code, out, err = invoke_runner(request)
    assert code == 0, f"runner exited {code}: {err}"
    return json.loads(out)


@pytest.fixture(scope="session")
def torch_available():
    probe = subprocess.run([sys.executable, str(RUNNER), "--probe"],
                           capture_output=True, text=True, timeout=120)
    report = json.loads(probe.stdout)
    if not report.get("available"):
        pytest.skip(f"tensor framework unavailable: {report.get('error')}")
    return report
