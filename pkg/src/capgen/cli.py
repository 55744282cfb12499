"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 operational error. A JSON
configuration file (--config) mirrors the flags by their long names; explicit
flags win over the file.
"""

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bleu import bleu4, tokenize
from .contract import check, explain, report_to_dict
from .gateway import (
    EndpointConfig,
    GatewayError,
    HttpGateway,
    ReplayGateway,
)
from .pipeline import PipelineConfig, render_summary, run_batch
from .prompting import (
    PromptError,
    PromptSpec,
    load_snippet_pool,
    packaged_baseline,
    packaged_snippet_pool,
)
from .recovery import sanitize, syntax_check
from .registry import (
    RegistryError,
    family_summary_csv,
    family_summary_table,
    metrics_csv,
    open_store,
)
from .smoke import SmokeRequest, probe_runner, run_smoke, runner_command

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_OPERATIONAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capgen",
        description="Generate, sanitize, validate, smoke-test, and score captioning models.",
    )
    parser.add_argument("--version", action="version", version=f"capgen {__version__}")
    parser.add_argument("--db", default="capgen.db", help="registry database path")
    parser.add_argument("--config", default=None, help="JSON config file mirroring the flags")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run generation rounds")
    gen.add_argument("--snippets", type=int, default=5, help="snippet count N")
    gen.add_argument("--rounds", type=int, default=1, help="attempts in this run")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--base", default="RESNETLSTM", help="baseline family name")
    mode = gen.add_mutually_exclusive_group()
    mode.add_argument("--replay", default=None, help="fixture directory (offline replay)")
    mode.add_argument("--endpoint", default=None, help="chat-completions endpoint URL")
    gen.add_argument("--smoke", action="store_true", help="smoke-run accepted candidates")
    gen.add_argument("--runner", default=None, help="sandbox runner script path")
    gen.add_argument("--pool", default=None, help="snippet pool directory (manifest.json)")
    gen.add_argument("--baseline", default=None, help="baseline captioning source file")
    gen.add_argument("--exclude", action="append", default=[], help="family to exclude (repeatable)")
    gen.add_argument("--model", default="local-model", help="model name sent to the endpoint")
    gen.add_argument("--temperature", type=float, default=0.8)
    gen.add_argument("--max-tokens", type=int, default=4096)
    gen.add_argument("--repair-limit", type=int, default=2)
    gen.add_argument("--workers", type=int, default=2)
    gen.add_argument("--run-id", default=None)
    gen.add_argument("--api-key", default="")

    san = sub.add_parser("sanitize", help="sanitize one raw-output file")
    san.add_argument("file")

    val = sub.add_parser("validate", help="contract-check one source file")
    val.add_argument("file")

    smk = sub.add_parser("smoke", help="smoke-run one source file in the sandbox")
    smk.add_argument("file")
    smk.add_argument("--runner", required=True, help="sandbox runner script path")
    smk.add_argument("--timeout", type=float, default=120.0)

    bl = sub.add_parser("bleu", help="corpus BLEU-4 over caption files")
    bl.add_argument("--hyp", required=True, help="candidate captions, one per line")
    bl.add_argument("--refs", required=True, nargs="+", help="line-aligned reference files")

    rep = sub.add_parser("report", help="family summary / run report")
    rep.add_argument("--run", default=None, help="report a single run")
    rep.add_argument("--csv", action="store_true", help="emit CSV instead of the aligned table")
    rep.add_argument("--metrics", action="store_true", help="emit prefix,best_bleu4")
    return parser


def _apply_config_file(parser, argv):
    """Seed parser defaults from --config before the real parse."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    path = Path(known.config)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    values = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(values, dict):
        raise ValueError("config file must hold a JSON object")
    defaults = {key.replace("-", "_"): value for key, value in values.items()}
    parser.set_defaults(**defaults)
    for action in parser._subparsers._group_actions:
        for subparser in action.choices.values():
            valid = {a.dest for a in subparser._actions}
            subparser.set_defaults(**{k: v for k, v in defaults.items() if k in valid})


def _read_file(path) -> str:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"file not found: {p}")
    return p.read_text(encoding="utf-8")


def cmd_generate(args) -> int:
    pool = load_snippet_pool(args.pool) if args.pool else packaged_snippet_pool()
    baseline = _read_file(args.baseline) if args.baseline else packaged_baseline()

    if args.replay:
        gateway = ReplayGateway(args.replay)
    elif args.endpoint:
        gateway = HttpGateway(EndpointConfig(url=args.endpoint, api_key=args.api_key))
    else:
        print("error: one of --replay or --endpoint is required", file=sys.stderr)
        return EXIT_OPERATIONAL

    smoke_runner = None
    if args.smoke:
        if not args.runner:
            print("error: --smoke requires --runner", file=sys.stderr)
            return EXIT_OPERATIONAL
        cmd = runner_command(args.runner)
        capability = probe_runner(cmd)
        if not capability.get("available"):
            print(
                f"warning: sandbox unavailable ({capability.get('error', 'no framework')}); "
                "smoke disabled",
                file=sys.stderr,
            )
        else:
            smoke_runner = lambda source: run_smoke(SmokeRequest(source_text=source), cmd)

    config = PipelineConfig(
        snippet_count=args.snippets,
        rounds=args.rounds,
        repair_limit=args.repair_limit,
        smoke_enabled=smoke_runner is not None,
        seed=args.seed,
        max_tokens=args.max_tokens,
        model_name=args.model,
        workers=args.workers,
    )
    spec = PromptSpec(
        baseline_source=baseline,
        snippet_count=args.snippets,
        snippet_pool=pool,
        base_name=args.base,
        excluded_families=frozenset(args.exclude),
        seed=args.seed,
        temperature=args.temperature,
    )
    with open_store(args.db, max_repairs=max(2, args.repair_limit)) as store:
        summary = run_batch(config, spec, gateway, store, run_id=args.run_id,
                            smoke_runner=smoke_runner)
    sys.stdout.write(render_summary(summary))
    return EXIT_OK


def cmd_sanitize(args) -> int:
    result = sanitize(_read_file(args.file))
    sys.stdout.write(result.text)
    if not result.text.endswith("\n"):
        sys.stdout.write("\n")
    for entry in result.pass_log:
        print(f"{entry.name}: {'changed' if entry.changed else 'ok'} ({entry.detail})",
              file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_VALIDATION


def cmd_validate(args) -> int:
    # the file is judged as written; `sanitize` is the tool for raw output
    source = _read_file(args.file)
    failure = syntax_check(source)
    if failure is not None:
        payload = {
            "passed": False,
            "syntax_failure": {
                "line": failure.line,
                "column": failure.column,
                "message": failure.message,
            },
        }
        print(json.dumps(payload, indent=2))
        return EXIT_VALIDATION
    report = check(source)
    print(json.dumps(report_to_dict(report), indent=2))
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_smoke(args) -> int:
    source = _read_file(args.file)
    cmd = runner_command(args.runner)
    capability = probe_runner(cmd)
    if not capability.get("available"):
        print(f"error: sandbox unavailable: {capability.get('error', 'no framework')}",
              file=sys.stderr)
        return EXIT_OPERATIONAL
    report = run_smoke(SmokeRequest(source_text=source, timeout_s=args.timeout), cmd)
    print(json.dumps({
        "status": report.status,
        "logits_shape": list(report.logits_shape) if report.logits_shape else None,
        "losses": list(report.losses),
        "message": report.message,
    }, indent=2))
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_bleu(args) -> int:
    hyp_lines = _read_file(args.hyp).splitlines()
    ref_files = [_read_file(path).splitlines() for path in args.refs]
    for i, lines in enumerate(ref_files):
        if len(lines) != len(hyp_lines):
            raise ValueError(
                f"reference file {args.refs[i]} has {len(lines)} lines, expected {len(hyp_lines)}"
            )
    candidates = [tokenize(line) for line in hyp_lines]
    references = [
        [tokenize(ref_lines[i]) for ref_lines in ref_files] for i in range(len(hyp_lines))
    ]
    breakdown = bleu4(candidates, references)
    print(json.dumps({
        "bleu4": breakdown.bleu4,
        "brevity_penalty": breakdown.brevity_penalty,
        "candidate_len": breakdown.candidate_len,
        "effective_ref_len": breakdown.effective_ref_len,
        "precisions": [
            {"n": n, "clipped": clipped, "total": total}
            for n, (clipped, total) in enumerate(breakdown.precisions, 1)
        ],
    }, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    with open_store(args.db) as store:
        if args.run:
            counts = store.status_counts(args.run)
            rate = store.success_rate(args.run)
            print(json.dumps({"run_id": args.run, "status_counts": counts,
                              "success_rate": rate}, indent=2))
            return EXIT_OK
        if args.metrics:
            sys.stdout.write(metrics_csv(store))
        elif args.csv:
            sys.stdout.write(family_summary_csv(store))
        else:
            sys.stdout.write(family_summary_table(store))
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "sanitize": cmd_sanitize,
    "validate": cmd_validate,
    "smoke": cmd_smoke,
    "bleu": cmd_bleu,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, ValueError, GatewayError, RegistryError, PromptError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
