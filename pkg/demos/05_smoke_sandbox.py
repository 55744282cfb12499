"""
Smoke-running a candidate in the sandbox
========================================

An accepted candidate is executed in an isolated child process: the runner
instantiates Net at synthetic scale, takes a couple of learn steps, runs one
forward pass, and verifies the (logits, hidden_state) shape contract and
loss finiteness. One JSON request goes down stdin, one JSON report comes
back on stdout; a hung candidate is killed by the parent.
"""

from pathlib import Path

from capgen import SmokeRequest, probe_runner, run_smoke
from capgen.prompting import packaged_baseline
from capgen.smoke import runner_command

RUNNER = Path(__file__).parents[1] / "sandbox" / "src" / "capgen_sandbox" / "runner.py"

command = runner_command(RUNNER)
capability = probe_runner(command)
print("sandbox capability:", capability)

if not capability.get("available"):
    print("tensor framework missing; smoke stays disabled upstream")
else:
    report = run_smoke(SmokeRequest(source_text=packaged_baseline(), steps=2), command)
    print("status:", report.status)
    print("logits shape:", report.logits_shape)
    print("losses:", [round(v, 3) for v in report.losses])
