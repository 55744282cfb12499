"""Smoke-test one generated captioning model in this (child) process.

Protocol (schema 1):
  stdin   one JSON request: {schema, source_text, in_shape, vocab_size,
          caption_len, steps, timeout_s, prm}
  stdout  one JSON report: {schema, status, logits_shape, losses, message}
  stderr  free-form logs
  exit 0  report produced (whatever the candidate did)
  exit !0 harness-internal failure only
  --probe capability report instead of a run

The parent process owns the wall clock and kills this process at timeout.

Candidate data contract: `learn(train_data)` consumes an iterable of
(image_batch, caption_batch) pairs and returns the per-batch training losses;
`forward(x)` takes one such pair and returns (logits, hidden_state) with
logits shaped [B, T-1, vocab_size]. Captions use pad index 0 with start and
end tokens at positions 0 and T-1.
"""

import json
import math
import platform
import sys
import traceback
import types

SCHEMA = 1

PASS = "PASS"
IMPORT_FAIL = "IMPORT_FAIL"
RUNTIME_FAIL = "RUNTIME_FAIL"
SHAPE_VIOLATION = "SHAPE_VIOLATION"
DIVERGED = "DIVERGED"


def probe() -> dict:
    report = {
        "schema": SCHEMA,
        "runtime": platform.python_version(),
        "framework": None,
        "device": None,
        "available": False,
    }
    try:
        import torch
    except ImportError as exc:
        report["error"] = f"tensor framework unavailable: {exc}"
        return report
    report["framework"] = f"torch {torch.__version__}"
    report["device"] = "cuda" if torch.cuda.is_available() else "cpu"
    report["available"] = True
    return report


def _report(status, logits_shape=None, losses=(), message=""):
    return {
        "schema": SCHEMA,
        "status": status,
        "logits_shape": None if logits_shape is None else list(logits_shape),
        "losses": [float(v) for v in losses],
        "message": message,
    }


def _tail(limit=4):
    lines = traceback.format_exc().strip().splitlines()
    return " | ".join(lines[-limit:])


def run_candidate(request: dict) -> dict:
    import torch
    import torch.nn.functional as F

    batch, channels, height, width = (int(v) for v in request["in_shape"])
    vocab_size = int(request["vocab_size"])
    caption_len = int(request["caption_len"])
    steps = int(request["steps"])
    prm = dict(request["prm"])

    module = types.ModuleType("candidate")
    module.__dict__["__name__"] = "candidate"
    try:
        exec(compile(request["source_text"], "<candidate>", "exec"), module.__dict__)
    except BaseException:
        return _report(IMPORT_FAIL, message=_tail())

    try:
        declared = module.supported_hyperparameters()
    except BaseException:
        return _report(RUNTIME_FAIL, message=f"supported_hyperparameters failed: {_tail()}")
    if set(declared) != {"lr", "momentum"}:
        return _report(RUNTIME_FAIL,
                       message=f"supported_hyperparameters returned {sorted(declared)!r}")

    def make_batch():
        images = torch.randn(batch, channels, height, width)
        captions = torch.randint(3, vocab_size, (batch, caption_len))
        captions[:, 0] = 1
        captions[:, -1] = 2
        return images, captions

    device = torch.device("cpu")
    losses: list[float] = []
    try:
        net = module.Net((batch, channels, height, width), (vocab_size,), prm, device)
        net.train_setup(prm)
        returned = net.learn([make_batch() for _ in range(steps)])
    except BaseException:
        return _report(RUNTIME_FAIL, losses=losses, message=f"training failed: {_tail()}")
    if isinstance(returned, (list, tuple)):
        try:
            losses.extend(float(v) for v in returned)
        except (TypeError, ValueError):
            pass

    try:
        images, captions = make_batch()
        result = net.forward((images, captions))
    except BaseException:
        return _report(RUNTIME_FAIL, losses=losses, message=f"forward failed: {_tail()}")

    if not isinstance(result, (tuple, list)) or len(result) != 2:
        return _report(SHAPE_VIOLATION, losses=losses,
                       message="forward must return (logits, hidden_state)")
    logits = result[0]
    if not hasattr(logits, "shape"):
        return _report(SHAPE_VIOLATION, losses=losses, message="logits is not a tensor")
    shape = tuple(int(d) for d in logits.shape)
    expected = (batch, caption_len - 1, vocab_size)
    if shape != expected:
        return _report(SHAPE_VIOLATION, logits_shape=shape, losses=losses,
                       message=f"logits shape {list(shape)} != {list(expected)}")

    try:
        final = F.cross_entropy(
            logits.reshape(-1, vocab_size).float(),
            captions[:, 1:].reshape(-1),
            ignore_index=0,
        )
        losses.append(float(final.detach()))
    except BaseException:
        return _report(RUNTIME_FAIL, logits_shape=shape, losses=losses,
                       message=f"loss check failed: {_tail()}")

    if any(not math.isfinite(v) for v in losses):
        return _report(DIVERGED, logits_shape=shape, losses=losses,
                       message="non-finite loss observed")
    return _report(PASS, logits_shape=shape, losses=losses)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if "--probe" in argv:
        json.dump(probe(), sys.stdout)
        sys.stdout.write("\n")
        return 0
    try:
        request = json.load(sys.stdin)
        if request.get("schema") != SCHEMA:
            raise ValueError(f"unsupported request schema {request.get('schema')!r}")
        for key in ("source_text", "in_shape", "vocab_size", "caption_len", "steps", "prm"):
            if key not in request:
                raise ValueError(f"request missing {key!r}")
    except ValueError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return 64
    report = run_candidate(request)
    json.dump(report, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
