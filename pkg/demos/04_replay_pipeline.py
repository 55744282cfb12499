"""
A full generation batch, replayed offline
=========================================

The pipeline assembles one prompt per round (seed + round index), asks the
gateway for a completion, sanitizes and contract-checks it, repairs up to
twice, and records everything. Here the gateway replays canned fixtures, so
the whole run is deterministic and needs no endpoint: we record a clean
completion for two rounds and a contract-broken one (with its equally broken
repair) for the third.
"""

import tempfile
from pathlib import Path

from capgen import (
    PipelineConfig,
    PromptSpec,
    ReplayGateway,
    assemble_prompt,
    build_repair_prompt,
    check,
    explain,
    open_store,
    prompt_hash,
    record_fixture,
    sanitize,
)
from capgen.pipeline import render_summary, run_batch
from capgen.prompting import packaged_baseline, packaged_snippet_pool
from capgen.registry import family_summary_table

pool = packaged_snippet_pool()
baseline = packaged_baseline()

clean_reply = f"```python\n{baseline}```\n"
broken_reply = clean_reply.replace("    def learn(self, train_data):",
                                   "    def skip_learn(self, train_data):")

workdir = Path(tempfile.mkdtemp(prefix="capgen-demo-"))
fixtures = workdir / "fixtures"

for round_index in range(3):
    spec = PromptSpec(
        baseline_source=baseline, snippet_count=5, snippet_pool=pool,
        base_name="RESNETLSTM", seed=100 + round_index,
    )
    prompt = assemble_prompt(spec)
    reply = broken_reply if round_index == 1 else clean_reply
    record_fixture(fixtures, prompt_hash(prompt.system_message, prompt.user_message), reply)
    if round_index == 1:
        candidate = sanitize(reply)
        feedback = explain(check(candidate))
        repair = build_repair_prompt(prompt, candidate.text, feedback)
        record_fixture(fixtures, prompt_hash(repair.system_message, repair.user_message),
                       broken_reply)

config = PipelineConfig(snippet_count=5, rounds=3)
spec = PromptSpec(
    baseline_source=baseline, snippet_count=5, snippet_pool=pool,
    base_name="RESNETLSTM", seed=100,
)

with open_store(workdir / "registry.db") as store:
    summary = run_batch(config, spec, ReplayGateway(fixtures), store)
    print(render_summary(summary))
    print(family_summary_table(store))
    for outcome in summary.outcomes:
        print(f"{outcome.attempt_id}: {outcome.status} after {outcome.repair_count} repair(s)")

print(f"\nartifacts under {workdir}")
