import math
import os
import stat
import threading

import pytest

from capgen.registry import (
    AttemptRecord,
    DuplicateAttemptError,
    MetricRecord,
    RegistryError,
    SCHEMA_VERSION,
    SchemaVersionError,
    SnippetRecord,
    Store,
    UnknownRunError,
    family_summary_csv,
    family_summary_table,
    metrics_csv,
    open_store,
)


def make_attempt(attempt_id="a-001", run_id="run-1", prefix="C5C-RESNETLSTM",
                 status="SUCCESS", decoder="LSTM", raw="```python\nx```",
                 repair_count=0, final="x = 1\n"):
    return AttemptRecord(
        attempt_id=attempt_id,
        run_id=run_id,
        family_prefix=prefix,
        snippet_count=5,
        snippet_ids=["s1", "s2", "s3", "s4", "s5"],
        prompt_hash="deadbeef",
        raw_output=raw,
        final_source=final,
        repair_count=repair_count,
        status=status,
        decoder_type=decoder,
        created_at="2025-01-01T00:00:00+00:00",
        finished_at="2025-01-01T00:01:00+00:00",
    )


@pytest.fixture
def store(tmp_path):
    with open_store(tmp_path / "registry.db") as s:
        yield s


# ---------------------------------------------------------------------------
# open_store
# ---------------------------------------------------------------------------

def test_fresh_store_is_empty(store):
    assert store.list_attempts() == []
    assert store.family_summary() == [("TOTAL", "", 0)]


def test_reopen_round_trips_attempts(tmp_path):
    path = tmp_path / "registry.db"
    attempt = make_attempt()
    with open_store(path) as s:
        s.record_attempt(attempt)
    with open_store(path) as s:
        assert s.get_attempt("a-001") == attempt


def test_unwritable_path_rejected(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    with pytest.raises(RegistryError, match="unwritable"):
        open_store(blocker / "registry.db")
    if os.getuid() != 0:  # permission bits are advisory for root
        ro_dir = tmp_path / "ro"
        ro_dir.mkdir()
        os.chmod(ro_dir, stat.S_IRUSR | stat.S_IXUSR)
        try:
            with pytest.raises(RegistryError, match="unwritable"):
                open_store(ro_dir / "registry.db")
        finally:
            os.chmod(ro_dir, stat.S_IRWXU)


def test_incompatible_schema_version_rejected(tmp_path):
    path = tmp_path / "registry.db"
    with open_store(path) as s:
        s._conn.execute("UPDATE meta SET value = ? WHERE key = 'schema_version'",
                        (str(SCHEMA_VERSION + 1),))
        s._conn.commit()
    with pytest.raises(SchemaVersionError):
        open_store(path)


# ---------------------------------------------------------------------------
# snippets
# ---------------------------------------------------------------------------

def test_snippet_round_trip(store):
    snippet = SnippetRecord("resnet-block", "ResNet", "class Block: pass", "encoder-donor")
    store.add_snippet(snippet)
    assert store.list_snippets() == [snippet]


def test_snippet_invariants(store):
    with pytest.raises(ValueError):
        store.add_snippet(SnippetRecord("x", "", "code"))
    with pytest.raises(ValueError):
        store.add_snippet(SnippetRecord("x", "F", ""))
    store.add_snippet(SnippetRecord("x", "F", "code"))
    with pytest.raises(RegistryError):
        store.add_snippet(SnippetRecord("x", "F", "other code"))


# ---------------------------------------------------------------------------
# record_attempt
# ---------------------------------------------------------------------------

def test_record_attempt_returns_id_and_counts(store):
    assert store.record_attempt(make_attempt()) == "a-001"
    assert len(store.list_attempts()) == 1


def test_identical_triple_is_idempotent(store):
    first = store.record_attempt(make_attempt(attempt_id="a-001"))
    second = store.record_attempt(make_attempt(attempt_id="a-002"))
    assert first == second == "a-001"
    assert len(store.list_attempts()) == 1


def test_duplicate_id_with_different_payload_rejected(store):
    store.record_attempt(make_attempt(raw="first"))
    with pytest.raises(DuplicateAttemptError):
        store.record_attempt(make_attempt(raw="second"))


def test_repair_count_over_limit_rejected(store):
    with pytest.raises(ValueError, match="repair_count"):
        store.record_attempt(make_attempt(repair_count=3))


def test_success_requires_final_source(store):
    with pytest.raises(ValueError, match="final_source"):
        store.record_attempt(make_attempt(final=None))


def test_round_trip_field_for_field(store):
    attempt = make_attempt(status="CONTRACT_FAIL", decoder="Transformer", repair_count=2)
    store.record_attempt(attempt)
    assert store.get_attempt(attempt.attempt_id) == attempt


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_metric_round_trip(store):
    store.record_attempt(make_attempt())
    metric = MetricRecord("a-001", epoch=0, loss=2.5, bleu4=0.12)
    store.record_metric(metric)
    got = store.metrics_for("a-001")
    assert got == [metric]


def test_nan_loss_requires_diverged_status(store):
    store.record_attempt(make_attempt(attempt_id="ok", status="SUCCESS"))
    with pytest.raises(ValueError, match="DIVERGED"):
        store.record_metric(MetricRecord("ok", 0, loss=float("nan")))
    diverged = make_attempt(attempt_id="bad", run_id="run-2", status="DIVERGED", raw="other")
    store.record_attempt(diverged)
    store.record_metric(MetricRecord("bad", 0, loss=float("nan")))
    got = store.metrics_for("bad")
    assert len(got) == 1 and math.isnan(got[0].loss)


def test_bleu_range_enforced(store):
    store.record_attempt(make_attempt())
    with pytest.raises(ValueError):
        store.record_metric(MetricRecord("a-001", 1, loss=1.0, bleu4=1.5))


# ---------------------------------------------------------------------------
# family_summary
# ---------------------------------------------------------------------------

TABLE_ROWS = [
    ("C1C-RESNETLSTM", "LSTM", 1),
    ("C5C-RESNETLSTM", "LSTM", 100),
    ("C10C-RESNETLSTM", "GRU", 3),
    ("C5C-ResNetTransformer", "Transformer", 250),
    ("C8C-ResNetTransformer", "GRU", 3),
]


def seed_table_rows(store):
    batch = []
    i = 0
    for prefix, decoder, count in TABLE_ROWS:
        for _ in range(count):
            i += 1
            batch.append(make_attempt(
                attempt_id=f"t-{i:04d}", run_id="seed", prefix=prefix,
                decoder=decoder, raw=f"output {i}", status="VALID",
            ))
    store.record_attempts(batch)


def test_family_summary_reproduces_published_counts(store):
    seed_table_rows(store)
    summary = dict((p, (d, c)) for p, d, c in store.family_summary())
    for prefix, decoder, count in TABLE_ROWS:
        assert summary[prefix] == (decoder, count)
    assert summary["TOTAL"] == ("", 357)


def test_family_summary_counts_only_success_statuses(store):
    for i, status in enumerate(["SUCCESS", "SUCCESS", "SUCCESS", "SUCCESS", "CONTRACT_FAIL"]):
        store.record_attempt(make_attempt(
            attempt_id=f"a-{i}", raw=f"r{i}", status=status,
            final="x = 1\n" if status == "SUCCESS" else None,
        ))
    rows = store.family_summary()
    assert rows == [("C5C-RESNETLSTM", "LSTM", 4), ("TOTAL", "", 4)]


def test_family_summary_total_equals_sum(store):
    seed_table_rows(store)
    rows = store.family_summary()
    total = rows[-1][2]
    assert total == sum(count for _p, _d, count in rows[:-1])


# ---------------------------------------------------------------------------
# success_rate
# ---------------------------------------------------------------------------

def test_success_rate_four_of_five(store):
    for i in range(5):
        status = "SUCCESS" if i < 4 else "RUNTIME_FAIL"
        store.record_attempt(make_attempt(
            attempt_id=f"a-{i}", raw=f"r{i}", status=status,
            final="x = 1\n" if status == "SUCCESS" else None,
        ))
    assert store.success_rate("run-1") == pytest.approx(0.80)


def test_success_rate_three_of_five(store):
    for i in range(5):
        status = "VALID" if i < 3 else "SYNTAX_FAIL"
        store.record_attempt(make_attempt(
            attempt_id=f"a-{i}", raw=f"r{i}", status=status, final=None,
        ))
    assert store.success_rate("run-1") == pytest.approx(0.60)


def test_success_rate_unknown_run(store):
    with pytest.raises(UnknownRunError):
        store.success_rate("nope")


def test_success_rate_matches_brute_force_recount(store):
    import random
    rng = random.Random(5)
    statuses = ["SUCCESS", "VALID", "SYNTAX_FAIL", "CONTRACT_FAIL", "RUNTIME_FAIL", "DIVERGED"]
    picked = []
    for i in range(40):
        status = rng.choice(statuses)
        picked.append(status)
        store.record_attempt(make_attempt(
            attempt_id=f"a-{i}", raw=f"r{i}", status=status,
            final="x = 1\n" if status == "SUCCESS" else None,
        ))
    want = sum(1 for s in picked if s in ("SUCCESS", "VALID")) / len(picked)
    got = store.success_rate("run-1")
    assert got == pytest.approx(want)
    assert 0.0 <= got <= 1.0


def test_configurable_success_predicate(tmp_path):
    with open_store(tmp_path / "r.db", success_statuses=("SUCCESS",)) as s:
        s.record_attempt(make_attempt(attempt_id="a", raw="1", status="VALID", final=None))
        s.record_attempt(make_attempt(attempt_id="b", raw="2", status="SUCCESS"))
        assert s.success_rate("run-1") == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def test_csv_export_columns(store):
    seed_table_rows(store)
    text = family_summary_csv(store)
    lines = text.strip().split("\n")
    assert lines[0] == "prefix,decoder_type,count"
    assert "C5C-RESNETLSTM,LSTM,100" in lines
    assert lines[-1] == "TOTAL,,357"


def test_table_export_aligned(store):
    seed_table_rows(store)
    text = family_summary_table(store)
    lines = text.strip().split("\n")
    assert lines[0].split() == ["prefix", "decoder_type", "count"]
    assert lines[-1].startswith("TOTAL")
    assert lines[-1].endswith("357")


def test_metrics_export(store):
    store.record_attempt(make_attempt())
    store.record_metric(MetricRecord("a-001", 1, loss=2.0, bleu4=0.1192))
    store.record_metric(MetricRecord("a-001", 2, loss=1.9, bleu4=0.1050))
    text = metrics_csv(store)
    assert text.splitlines() == ["prefix,best_bleu4", "C5C-RESNETLSTM,0.1192"]


# ---------------------------------------------------------------------------
# concurrency
# ---------------------------------------------------------------------------

def test_concurrent_writers_serialize(store):
    errors = []

    def writer(k):
        try:
            for i in range(20):
                store.record_attempt(make_attempt(
                    attempt_id=f"w{k}-{i}", run_id=f"run-{k}", raw=f"w{k}-{i}",
                    status="VALID", final=None,
                ))
        except Exception as exc:  # noqa: BLE001 - collected for assertion
            errors.append(exc)

    threads = [threading.Thread(target=writer, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert len(store.list_attempts()) == 80
