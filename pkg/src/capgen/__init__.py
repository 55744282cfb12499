"""Generate, sanitize, validate, smoke-test, and score LLM-authored captioning models."""

from .bleu import BleuBreakdown, bleu4, brevity_penalty, modified_precision, tokenize
from .contract import ContractReport, Violation, check, classify_decoder, explain
from .gateway import (
    ChatRequest,
    ChatResponse,
    EndpointConfig,
    HttpGateway,
    ReplayGateway,
    record_fixture,
)
from .pipeline import (
    AttemptOutcome,
    PipelineConfig,
    RunSummary,
    build_repair_prompt,
    run_attempt,
    run_batch,
)
from .prompting import (
    PromptSpec,
    PromptText,
    assemble_prompt,
    family_prefix,
    load_snippet_pool,
    prompt_hash,
    sample_snippets,
)
from .recovery import CandidateSource, SyntaxFailure, sanitize
from .registry import AttemptRecord, MetricRecord, SnippetRecord, Store, open_store
from .smoke import SmokeReport, SmokeRequest, probe_runner, run_smoke

__version__ = "0.1.0"

__all__ = [
    "AttemptOutcome", "AttemptRecord", "BleuBreakdown", "CandidateSource",
    "ChatRequest", "ChatResponse", "ContractReport", "EndpointConfig",
    "HttpGateway", "MetricRecord", "PipelineConfig", "PromptSpec", "PromptText",
    "ReplayGateway", "RunSummary", "SmokeReport", "SmokeRequest", "SnippetRecord",
    "Store", "SyntaxFailure", "Violation", "assemble_prompt", "bleu4",
    "brevity_penalty", "build_repair_prompt", "check", "classify_decoder",
    "explain", "family_prefix", "load_snippet_pool", "modified_precision",
    "open_store", "probe_runner", "prompt_hash", "record_fixture", "run_attempt",
    "run_batch", "run_smoke", "sample_snippets", "sanitize", "tokenize",
]
