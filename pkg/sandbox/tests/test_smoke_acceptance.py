"""Acceptance gate for the sandbox runner, one PASS line per check."""

import math
import time

from conftest import fixture_source, invoke_runner, make_request, run_report


def test_smoke_contract_acceptance(torch_available, capsys):
    report = run_report(make_request(fixture_source("compliant_tiny")))
    assert report["status"] == "PASS", report
    assert report["logits_shape"] == [2, 5, 16]
    assert all(math.isfinite(v) for v in report["losses"])
    print("PASS: compliant reference fixture PASSes with logits [B, T-1, V]")

    report = run_report(make_request(fixture_source("wrong_shape")))
    assert report["status"] == "SHAPE_VIOLATION", report
    print("PASS: [B, T, V]-shaped fixture yields SHAPE_VIOLATION")

    report = run_report(make_request(fixture_source("divergent_learn")))
    assert report["status"] == "DIVERGED", report
    print("PASS: divergent fixture yields DIVERGED")

    timeout_s = 15.0
    started = time.monotonic()
    result, _out, _err = invoke_runner(make_request(fixture_source("infinite_loop"),
                                                    timeout_s=timeout_s))
    elapsed = time.monotonic() - started
    assert result == "TIMEOUT", result
    assert elapsed < timeout_s + 10.0, f"took {elapsed:.1f}s"
    print(f"PASS: infinite-loop fixture yields TIMEOUT within {timeout_s + 10:.0f}s")
