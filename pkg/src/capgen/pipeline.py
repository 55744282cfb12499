"""Drive attempts through generate -> sanitize -> check -> repair -> smoke -> record.

One attempt issues at most 1 + repair_limit gateway calls. A repair re-enters
at sanitize so repaired output gets the full fix-up chain. Statuses only move
forward; every terminal state is recorded in the registry.
"""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .contract import ContractReport, check, explain
from .gateway import ChatRequest, GatewayError
from .prompting import PromptSpec, PromptText, assemble_prompt, prompt_hash
from .recovery import sanitize
from .registry import STATUSES, AttemptRecord, MetricRecord, Store
from .smoke import SMOKE_DIVERGED, SMOKE_PASS, SmokeReport


@dataclass
class PipelineConfig:
    snippet_count: int = 5
    rounds: int = 1
    repair_limit: int = 2
    smoke_enabled: bool = False
    seed: int = 0
    repair_temperature: float = 0.2
    max_tokens: int = 4096
    model_name: str = "local-model"
    workers: int = 2
    # recorded training configuration, passed to the smoke runner as scale
    # hints; the orchestrator itself never trains at full scale
    epochs: int = 3
    batch_size: int = 32
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.repair_limit < 0:
            raise ValueError("repair_limit must be >= 0")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass
class AttemptOutcome:
    attempt_id: str
    status: str
    final_source: str | None = None
    contract_report: ContractReport | None = None
    smoke_report: SmokeReport | None = None
    repair_transcript: list[tuple[str, str]] = field(default_factory=list)
    repair_count: int = 0
    prompt_digest: str = ""


@dataclass
class RunSummary:
    run_id: str
    rounds: int
    status_counts: dict
    success_rate: float
    outcomes: list[AttemptOutcome] = field(default_factory=list)


REPAIR_HEADER = (
    "The code below failed validation. Fix ONLY the reported errors; do not\n"
    "restructure working code. Output the complete corrected file as one\n"
    "fenced Python code block and nothing else."
)


def build_repair_prompt(original: PromptText, current_code: str, feedback: str) -> PromptText:
    """Strict repair instructions: header, then feedback, then current code."""
    if not feedback:
        raise ValueError("feedback must be non-empty")
    user_message = (
        f"{REPAIR_HEADER}\n\n"
        f"Reported errors:\n{feedback}\n\n"
        f"Current code:\n```python\n{current_code}\n```\n\n"
        f"Original instructions follow for reference.\n\n{original.user_message}"
    )
    return PromptText(
        system_message=original.system_message,
        user_message=user_message,
        snippet_manifest=list(original.snippet_manifest),
        family_prefix=original.family_prefix,
    )


def _response_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _map_smoke_status(report: SmokeReport) -> str:
    if report.status == SMOKE_PASS:
        return "SUCCESS"
    if report.status == SMOKE_DIVERGED:
        return "DIVERGED"
    return "RUNTIME_FAIL"


def run_attempt(config: PipelineConfig, prompt_spec: PromptSpec, gateway, store: Store,
                *, run_id: str = "adhoc", round_index: int = 0,
                smoke_runner=None) -> AttemptOutcome:
    """Execute one attempt's state machine and record the result.

    `smoke_runner` is a callable(source_text) -> SmokeReport; when absent (or
    smoke disabled) a contract-passing attempt terminates as VALID.
    """
    prompt = assemble_prompt(prompt_spec)
    digest = prompt_hash(prompt.system_message, prompt.user_message)
    attempt_id = f"{run_id}-r{round_index:03d}"

    def record(status, *, raw_output, final_source, repair_count, decoder_type, detail=""):
        already = store.find_attempt(run_id, digest, raw_output)
        record_id = store.record_attempt(AttemptRecord(
            attempt_id=attempt_id,
            run_id=run_id,
            family_prefix=prompt.family_prefix,
            snippet_count=prompt_spec.snippet_count,
            snippet_ids=list(prompt.snippet_manifest),
            prompt_hash=digest,
            raw_output=raw_output,
            final_source=final_source,
            repair_count=repair_count,
            status=status,
            decoder_type=decoder_type,
            detail=detail,
        ))
        return record_id, already is None

    request = ChatRequest(
        system_message=prompt.system_message,
        user_message=prompt.user_message,
        temperature=prompt_spec.temperature,
        max_tokens=config.max_tokens,
        model_name=config.model_name,
    )
    try:
        response = gateway.complete(request)
    except GatewayError as exc:
        record_id, _ = record(
            "SYNTAX_FAIL", raw_output="", final_source=None,
            repair_count=0, decoder_type="Unknown", detail=f"GEN_FAIL: {exc}",
        )
        return AttemptOutcome(record_id, "SYNTAX_FAIL", prompt_digest=digest)
    store.log_exchange(request.hash, config.model_name, response.finish_reason,
                       response.latency_ms, run_id=run_id)

    raw_output = response.raw_text
    current_raw = raw_output
    repair_count = 0
    transcript: list[tuple[str, str]] = []
    candidate = None
    report = None

    while True:
        candidate = sanitize(current_raw)
        if candidate.ok:
            report = check(candidate)
            if report.passed:
                break
            feedback = explain(report)
            fail_status = "CONTRACT_FAIL"
        else:
            report = None
            feedback = explain(candidate.syntax_failure)
            fail_status = "SYNTAX_FAIL"

        if repair_count >= config.repair_limit:
            decoder = report.decoder_type if report is not None else "Unknown"
            record_id, _ = record(
                fail_status,
                raw_output=raw_output,
                final_source=candidate.text if candidate.ok else None,
                repair_count=repair_count,
                decoder_type=decoder,
                detail=feedback,
            )
            return AttemptOutcome(
                record_id, fail_status,
                final_source=candidate.text if candidate.ok else None,
                contract_report=report,
                repair_transcript=transcript,
                repair_count=repair_count,
                prompt_digest=digest,
            )

        repair_prompt = build_repair_prompt(prompt, candidate.text, feedback)
        repair_request = ChatRequest(
            system_message=repair_prompt.system_message,
            user_message=repair_prompt.user_message,
            temperature=config.repair_temperature,
            max_tokens=config.max_tokens,
            model_name=config.model_name,
        )
        try:
            repair_response = gateway.complete(repair_request)
        except GatewayError as exc:
            record_id, _ = record(
                fail_status,
                raw_output=raw_output,
                final_source=candidate.text if candidate.ok else None,
                repair_count=repair_count,
                decoder_type="Unknown",
                detail=f"GEN_FAIL during repair: {exc}",
            )
            return AttemptOutcome(
                record_id, fail_status,
                contract_report=report,
                repair_transcript=transcript,
                repair_count=repair_count,
                prompt_digest=digest,
            )
        store.log_exchange(repair_request.hash, config.model_name,
                           repair_response.finish_reason, repair_response.latency_ms,
                           run_id=run_id)
        repair_count += 1
        transcript.append((feedback, _response_hash(repair_response.raw_text)))
        current_raw = repair_response.raw_text

    smoke_report = None
    if config.smoke_enabled and smoke_runner is not None:
        smoke_report = smoke_runner(candidate.text)
        status = _map_smoke_status(smoke_report)
    else:
        status = "VALID"

    record_id, newly_recorded = record(
        status,
        raw_output=raw_output,
        final_source=candidate.text,
        repair_count=repair_count,
        decoder_type=report.decoder_type,
    )
    if smoke_report is not None and newly_recorded:
        if smoke_report.status == SMOKE_DIVERGED:
            store.record_metric(MetricRecord(record_id, epoch=0, loss=float("nan")))
        elif smoke_report.losses:
            store.record_metric(MetricRecord(record_id, epoch=0, loss=smoke_report.losses[-1]))

    return AttemptOutcome(
        record_id, status,
        final_source=candidate.text,
        contract_report=report,
        smoke_report=smoke_report,
        repair_transcript=transcript,
        repair_count=repair_count,
        prompt_digest=digest,
    )


def derive_run_id(config: PipelineConfig, spec: PromptSpec) -> str:
    """Deterministic run identifier over the full configuration."""
    descriptor = {
        "config": {
            "snippet_count": config.snippet_count,
            "rounds": config.rounds,
            "repair_limit": config.repair_limit,
            "smoke_enabled": config.smoke_enabled,
            "seed": config.seed,
            "model_name": config.model_name,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
        },
        "spec": {
            "base_name": spec.base_name,
            "snippet_count": spec.snippet_count,
            "seed": spec.seed,
            "rules_version": spec.rules_version,
            "temperature": spec.temperature,
            "excluded_families": sorted(spec.excluded_families),
            "baseline_sha": hashlib.sha256(spec.baseline_source.encode()).hexdigest(),
            "pool": [s.snippet_id for s in spec.snippet_pool],
        },
    }
    blob = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    return "run-" + hashlib.sha256(blob).hexdigest()[:12]


def run_batch(config: PipelineConfig, spec_template: PromptSpec, gateway, store: Store,
              *, run_id: str | None = None, smoke_runner=None) -> RunSummary:
    """Run `rounds` independent attempts with per-round derived seeds."""
    spec_template = replace(spec_template, snippet_count=config.snippet_count)
    run_id = run_id or derive_run_id(config, spec_template)
    store.ensure_run(run_id)

    def work(round_index: int) -> AttemptOutcome:
        spec = replace(spec_template, seed=spec_template.seed + round_index)
        return run_attempt(
            config, spec, gateway, store,
            run_id=run_id, round_index=round_index, smoke_runner=smoke_runner,
        )

    outcomes: list[AttemptOutcome | None] = [None] * config.rounds
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        futures = {pool.submit(work, r): r for r in range(config.rounds)}
        for future, round_index in futures.items():
            outcomes[round_index] = future.result()

    counts = {status: 0 for status in STATUSES}
    for outcome in outcomes:
        counts[outcome.status] += 1
    return RunSummary(
        run_id=run_id,
        rounds=config.rounds,
        status_counts=counts,
        success_rate=store.success_rate(run_id),
        outcomes=outcomes,
    )


def render_summary(summary: RunSummary) -> str:
    """Deterministic plain-text run report."""
    lines = [f"run {summary.run_id}: {summary.rounds} attempt(s)"]
    for status in STATUSES:
        lines.append(f"  {status:<13} {summary.status_counts.get(status, 0)}")
    lines.append(f"success_rate {summary.success_rate:.2f}")
    return "\n".join(lines) + "\n"
