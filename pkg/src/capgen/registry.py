"""SQLite-backed registry for snippets, runs, attempts, and metrics.

Tables:
- meta      schema version row
- snippets  classification-model source snippets (the prompt pool)
- runs      one row per batch invocation, with its configuration
- attempts  one generation attempt: prompt digest, raw output, outcome
- metrics   per-epoch loss/BLEU rows (epoch 0 = smoke run)
- exchanges gateway request/response log

Writers are serialized behind an internal lock so concurrent pipeline
workers can share one handle; one handle per worker also works.
"""

import csv
import io
import json
import math
import sqlite3
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

SCHEMA_VERSION = 1

STATUSES = ("VALID", "SYNTAX_FAIL", "CONTRACT_FAIL", "RUNTIME_FAIL", "DIVERGED", "SUCCESS")
DECODER_TYPES = ("LSTM", "GRU", "Transformer", "Unknown")
ROLE_TAGS = ("encoder-donor", "baseline-captioner")

DEFAULT_SUCCESS_STATUSES = ("VALID", "SUCCESS")


class RegistryError(Exception):
    pass


class SchemaVersionError(RegistryError):
    pass


class UnknownRunError(RegistryError):
    pass


class DuplicateAttemptError(RegistryError):
    pass


@dataclass
class SnippetRecord:
    snippet_id: str
    family: str
    source_text: str
    role_tag: str = "encoder-donor"


@dataclass
class AttemptRecord:
    attempt_id: str
    run_id: str
    family_prefix: str
    snippet_count: int
    snippet_ids: list[str]
    prompt_hash: str
    raw_output: str
    final_source: str | None
    repair_count: int
    status: str
    decoder_type: str = "Unknown"
    detail: str = ""
    created_at: str | None = None
    finished_at: str | None = None


@dataclass
class MetricRecord:
    attempt_id: str
    epoch: int
    loss: float | None = None
    bleu4: float | None = None

    @property
    def loss_is_nan(self) -> bool:
        return self.loss is not None and math.isnan(self.loss)


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


_SCHEMA = f"""
CREATE TABLE meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE snippets (
    snippet_id TEXT PRIMARY KEY,
    family TEXT NOT NULL,
    source_text TEXT NOT NULL,
    role_tag TEXT NOT NULL CHECK (role_tag IN {ROLE_TAGS!r})
);

CREATE TABLE runs (
    run_id TEXT PRIMARY KEY,
    config_json TEXT NOT NULL DEFAULT '',
    created_at TEXT NOT NULL
);

CREATE TABLE attempts (
    attempt_id TEXT PRIMARY KEY,
    run_id TEXT NOT NULL REFERENCES runs(run_id),
    family_prefix TEXT NOT NULL,
    snippet_count INTEGER NOT NULL CHECK (snippet_count >= 1),
    snippet_ids TEXT NOT NULL,
    prompt_hash TEXT NOT NULL,
    raw_output TEXT NOT NULL,
    final_source TEXT,
    repair_count INTEGER NOT NULL CHECK (repair_count >= 0),
    status TEXT NOT NULL CHECK (status IN {STATUSES!r}),
    decoder_type TEXT NOT NULL CHECK (decoder_type IN {DECODER_TYPES!r}),
    detail TEXT NOT NULL DEFAULT '',
    created_at TEXT NOT NULL,
    finished_at TEXT,
    UNIQUE (run_id, prompt_hash, raw_output)
);

CREATE INDEX idx_attempts_run ON attempts(run_id);
CREATE INDEX idx_attempts_prefix ON attempts(family_prefix);

CREATE TABLE metrics (
    id INTEGER PRIMARY KEY,
    attempt_id TEXT NOT NULL REFERENCES attempts(attempt_id),
    epoch INTEGER NOT NULL CHECK (epoch >= 0),
    loss REAL,
    loss_is_nan INTEGER NOT NULL DEFAULT 0,
    bleu4 REAL CHECK (bleu4 IS NULL OR (bleu4 >= 0.0 AND bleu4 <= 1.0))
);

CREATE INDEX idx_metrics_attempt ON metrics(attempt_id);

CREATE TABLE exchanges (
    id INTEGER PRIMARY KEY,
    run_id TEXT,
    prompt_hash TEXT NOT NULL,
    model_name TEXT NOT NULL,
    finish_reason TEXT NOT NULL,
    latency_ms INTEGER NOT NULL,
    created_at TEXT NOT NULL
);
"""


class Store:
    """One handle over a single-file registry database."""

    def __init__(self, path, *, max_repairs: int = 2,
                 success_statuses: tuple[str, ...] = DEFAULT_SUCCESS_STATUSES):
        self.path = Path(path)
        self.max_repairs = max_repairs
        self.success_statuses = tuple(success_statuses)
        self._lock = threading.Lock()
        try:
            self._conn = sqlite3.connect(str(self.path), check_same_thread=False)
        except sqlite3.OperationalError as exc:
            raise RegistryError(f"unwritable path: {self.path}") from exc
        self._conn.row_factory = sqlite3.Row
        try:
            self._conn.execute("PRAGMA foreign_keys = ON")
            self._init_or_check_schema()
        except sqlite3.OperationalError as exc:
            self._conn.close()
            raise RegistryError(f"unwritable path: {self.path}") from exc

    def _init_or_check_schema(self):
        row = self._conn.execute(
            "SELECT name FROM sqlite_master WHERE type='table' AND name='meta'"
        ).fetchone()
        if row is None:
            self._conn.executescript(_SCHEMA)
            self._conn.execute(
                "INSERT INTO meta (key, value) VALUES ('schema_version', ?)",
                (str(SCHEMA_VERSION),),
            )
            self._conn.commit()
            return
        version = self._conn.execute(
            "SELECT value FROM meta WHERE key = 'schema_version'"
        ).fetchone()
        if version is None or int(version["value"]) != SCHEMA_VERSION:
            found = None if version is None else version["value"]
            raise SchemaVersionError(
                f"incompatible schema version {found!r}, expected {SCHEMA_VERSION}"
            )

    def close(self):
        self._conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    # -- snippets -----------------------------------------------------------

    def add_snippet(self, snippet: SnippetRecord) -> str:
        if not snippet.source_text:
            raise ValueError("snippet source_text must be non-empty")
        if not snippet.family:
            raise ValueError("snippet family must be non-empty")
        if snippet.role_tag not in ROLE_TAGS:
            raise ValueError(f"unknown role_tag {snippet.role_tag!r}")
        with self._lock:
            existing = self._conn.execute(
                "SELECT family, source_text, role_tag FROM snippets WHERE snippet_id = ?",
                (snippet.snippet_id,),
            ).fetchone()
            if existing is not None:
                if (existing["family"], existing["source_text"], existing["role_tag"]) == (
                    snippet.family, snippet.source_text, snippet.role_tag,
                ):
                    return snippet.snippet_id
                raise RegistryError(f"snippet_id {snippet.snippet_id!r} already stored with different content")
            self._conn.execute(
                "INSERT INTO snippets (snippet_id, family, source_text, role_tag) VALUES (?, ?, ?, ?)",
                (snippet.snippet_id, snippet.family, snippet.source_text, snippet.role_tag),
            )
            self._conn.commit()
        return snippet.snippet_id

    def list_snippets(self) -> list[SnippetRecord]:
        rows = self._conn.execute("SELECT * FROM snippets ORDER BY snippet_id").fetchall()
        return [
            SnippetRecord(r["snippet_id"], r["family"], r["source_text"], r["role_tag"])
            for r in rows
        ]

    # -- runs / attempts ----------------------------------------------------

    def ensure_run(self, run_id: str, config_json: str = "") -> str:
        with self._lock:
            self._conn.execute(
                "INSERT OR IGNORE INTO runs (run_id, config_json, created_at) VALUES (?, ?, ?)",
                (run_id, config_json, _utcnow()),
            )
            self._conn.commit()
        return run_id

    def _validate_attempt(self, attempt: AttemptRecord):
        if attempt.status not in STATUSES:
            raise ValueError(f"unknown status {attempt.status!r}")
        if attempt.decoder_type not in DECODER_TYPES:
            raise ValueError(f"unknown decoder_type {attempt.decoder_type!r}")
        if attempt.snippet_count < 1:
            raise ValueError("snippet_count must be >= 1")
        if not 0 <= attempt.repair_count <= self.max_repairs:
            raise ValueError(
                f"repair_count {attempt.repair_count} outside 0..{self.max_repairs}"
            )
        if attempt.status == "SUCCESS" and not attempt.final_source:
            raise ValueError("status SUCCESS requires final_source")

    def record_attempt(self, attempt: AttemptRecord) -> str:
        """Durably store one attempt; idempotent on (run_id, prompt_hash, raw_output)."""
        self._validate_attempt(attempt)
        with self._lock:
            existing = self._conn.execute(
                "SELECT attempt_id FROM attempts WHERE run_id = ? AND prompt_hash = ? AND raw_output = ?",
                (attempt.run_id, attempt.prompt_hash, attempt.raw_output),
            ).fetchone()
            if existing is not None:
                return existing["attempt_id"]
            clash = self._conn.execute(
                "SELECT attempt_id FROM attempts WHERE attempt_id = ?",
                (attempt.attempt_id,),
            ).fetchone()
            if clash is not None:
                raise DuplicateAttemptError(
                    f"attempt_id {attempt.attempt_id!r} already stored with a different payload"
                )
            self._conn.execute(
                "INSERT OR IGNORE INTO runs (run_id, config_json, created_at) VALUES (?, '', ?)",
                (attempt.run_id, _utcnow()),
            )
            self._conn.execute(
                """
                INSERT INTO attempts
                    (attempt_id, run_id, family_prefix, snippet_count, snippet_ids,
                     prompt_hash, raw_output, final_source, repair_count, status,
                     decoder_type, detail, created_at, finished_at)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    attempt.attempt_id,
                    attempt.run_id,
                    attempt.family_prefix,
                    attempt.snippet_count,
                    json.dumps(attempt.snippet_ids),
                    attempt.prompt_hash,
                    attempt.raw_output,
                    attempt.final_source,
                    attempt.repair_count,
                    attempt.status,
                    attempt.decoder_type,
                    attempt.detail,
                    attempt.created_at or _utcnow(),
                    attempt.finished_at,
                ),
            )
            self._conn.commit()
        return attempt.attempt_id

    def record_attempts(self, attempts) -> list[str]:
        """Bulk variant of record_attempt with a single commit at the end."""
        ids = []
        with self._lock:
            try:
                for attempt in attempts:
                    self._validate_attempt(attempt)
                    existing = self._conn.execute(
                        "SELECT attempt_id FROM attempts WHERE run_id = ? AND prompt_hash = ? AND raw_output = ?",
                        (attempt.run_id, attempt.prompt_hash, attempt.raw_output),
                    ).fetchone()
                    if existing is not None:
                        ids.append(existing["attempt_id"])
                        continue
                    self._conn.execute(
                        "INSERT OR IGNORE INTO runs (run_id, config_json, created_at) VALUES (?, '', ?)",
                        (attempt.run_id, _utcnow()),
                    )
                    self._conn.execute(
                        """
                        INSERT INTO attempts
                            (attempt_id, run_id, family_prefix, snippet_count, snippet_ids,
                             prompt_hash, raw_output, final_source, repair_count, status,
                             decoder_type, detail, created_at, finished_at)
                        VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                        """,
                        (
                            attempt.attempt_id, attempt.run_id, attempt.family_prefix,
                            attempt.snippet_count, json.dumps(attempt.snippet_ids),
                            attempt.prompt_hash, attempt.raw_output, attempt.final_source,
                            attempt.repair_count, attempt.status, attempt.decoder_type,
                            attempt.detail, attempt.created_at or _utcnow(), attempt.finished_at,
                        ),
                    )
                    ids.append(attempt.attempt_id)
            except sqlite3.IntegrityError as exc:
                self._conn.rollback()
                raise DuplicateAttemptError(str(exc)) from exc
            except Exception:
                self._conn.rollback()
                raise
            self._conn.commit()
        return ids

    def _row_to_attempt(self, row: sqlite3.Row) -> AttemptRecord:
        return AttemptRecord(
            attempt_id=row["attempt_id"],
            run_id=row["run_id"],
            family_prefix=row["family_prefix"],
            snippet_count=row["snippet_count"],
            snippet_ids=json.loads(row["snippet_ids"]),
            prompt_hash=row["prompt_hash"],
            raw_output=row["raw_output"],
            final_source=row["final_source"],
            repair_count=row["repair_count"],
            status=row["status"],
            decoder_type=row["decoder_type"],
            detail=row["detail"],
            created_at=row["created_at"],
            finished_at=row["finished_at"],
        )

    def find_attempt(self, run_id: str, prompt_hash: str, raw_output: str) -> str | None:
        """attempt_id for an identical (run_id, prompt_hash, raw_output) triple, if stored."""
        row = self._conn.execute(
            "SELECT attempt_id FROM attempts WHERE run_id = ? AND prompt_hash = ? AND raw_output = ?",
            (run_id, prompt_hash, raw_output),
        ).fetchone()
        return None if row is None else row["attempt_id"]

    def get_attempt(self, attempt_id: str) -> AttemptRecord:
        row = self._conn.execute(
            "SELECT * FROM attempts WHERE attempt_id = ?", (attempt_id,)
        ).fetchone()
        if row is None:
            raise RegistryError(f"unknown attempt_id {attempt_id!r}")
        return self._row_to_attempt(row)

    def list_attempts(self, run_id: str | None = None) -> list[AttemptRecord]:
        if run_id is None:
            rows = self._conn.execute("SELECT * FROM attempts ORDER BY attempt_id").fetchall()
        else:
            rows = self._conn.execute(
                "SELECT * FROM attempts WHERE run_id = ? ORDER BY attempt_id", (run_id,)
            ).fetchall()
        return [self._row_to_attempt(r) for r in rows]

    # -- metrics ------------------------------------------------------------

    def record_metric(self, metric: MetricRecord):
        if metric.epoch < 0:
            raise ValueError("epoch must be >= 0")
        if metric.bleu4 is not None and not 0.0 <= metric.bleu4 <= 1.0:
            raise ValueError("bleu4 must lie in [0, 1]")
        is_nan = metric.loss_is_nan
        if is_nan:
            status = self.get_attempt(metric.attempt_id).status
            if status != "DIVERGED":
                raise ValueError("non-finite loss requires attempt status DIVERGED")
        with self._lock:
            self._conn.execute(
                "INSERT INTO metrics (attempt_id, epoch, loss, loss_is_nan, bleu4) VALUES (?, ?, ?, ?, ?)",
                (
                    metric.attempt_id,
                    metric.epoch,
                    None if is_nan else metric.loss,
                    1 if is_nan else 0,
                    metric.bleu4,
                ),
            )
            self._conn.commit()

    def metrics_for(self, attempt_id: str) -> list[MetricRecord]:
        rows = self._conn.execute(
            "SELECT * FROM metrics WHERE attempt_id = ? ORDER BY epoch, id", (attempt_id,)
        ).fetchall()
        out = []
        for r in rows:
            loss = float("nan") if r["loss_is_nan"] else r["loss"]
            out.append(MetricRecord(r["attempt_id"], r["epoch"], loss, r["bleu4"]))
        return out

    # -- gateway log --------------------------------------------------------

    def log_exchange(self, prompt_hash: str, model_name: str, finish_reason: str,
                     latency_ms: int, run_id: str | None = None):
        with self._lock:
            self._conn.execute(
                "INSERT INTO exchanges (run_id, prompt_hash, model_name, finish_reason, latency_ms, created_at)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                (run_id, prompt_hash, model_name, finish_reason, latency_ms, _utcnow()),
            )
            self._conn.commit()

    # -- reporting ----------------------------------------------------------

    def family_summary(self) -> list[tuple[str, str, int]]:
        """One (prefix, decoder_type, count) row per family plus a TOTAL row.

        Counts cover attempts whose status is in the configured success set.
        The decoder column shows the most frequent decoder type among the
        counted attempts (alphabetical on ties).
        """
        marks = ",".join("?" * len(self.success_statuses))
        rows = self._conn.execute(
            f"""
            SELECT family_prefix, decoder_type, COUNT(*) AS n
            FROM attempts
            WHERE status IN ({marks})
            GROUP BY family_prefix, decoder_type
            """,
            self.success_statuses,
        ).fetchall()
        per_prefix: dict[str, dict[str, int]] = {}
        for r in rows:
            per_prefix.setdefault(r["family_prefix"], {})[r["decoder_type"]] = r["n"]
        out: list[tuple[str, str, int]] = []
        total = 0
        for prefix in sorted(per_prefix):
            counts = per_prefix[prefix]
            decoder = max(sorted(counts), key=lambda d: counts[d])
            count = sum(counts.values())
            out.append((prefix, decoder, count))
            total += count
        out.append(("TOTAL", "", total))
        return out

    def success_rate(self, run_id: str) -> float:
        rows = self._conn.execute(
            "SELECT status FROM attempts WHERE run_id = ?", (run_id,)
        ).fetchall()
        if not rows:
            raise UnknownRunError(f"unknown or empty run {run_id!r}")
        hits = sum(1 for r in rows if r["status"] in self.success_statuses)
        return hits / len(rows)

    def status_counts(self, run_id: str) -> dict[str, int]:
        rows = self._conn.execute(
            "SELECT status, COUNT(*) AS n FROM attempts WHERE run_id = ? GROUP BY status",
            (run_id,),
        ).fetchall()
        return {r["status"]: r["n"] for r in rows}

    def best_bleu_by_family(self) -> list[tuple[str, float]]:
        rows = self._conn.execute(
            """
            SELECT a.family_prefix AS prefix, MAX(m.bleu4) AS best
            FROM metrics m JOIN attempts a ON a.attempt_id = m.attempt_id
            WHERE m.bleu4 IS NOT NULL
            GROUP BY a.family_prefix
            ORDER BY a.family_prefix
            """
        ).fetchall()
        return [(r["prefix"], r["best"]) for r in rows]


def open_store(path, *, max_repairs: int = 2,
               success_statuses: tuple[str, ...] = DEFAULT_SUCCESS_STATUSES) -> Store:
    """Open (creating if absent) a registry database at `path`."""
    return Store(path, max_repairs=max_repairs, success_statuses=success_statuses)


# -- report rendering ---------------------------------------------------------

def family_summary_csv(store: Store) -> str:
    """UTF-8 CSV with columns exactly: prefix, decoder_type, count."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["prefix", "decoder_type", "count"])
    for prefix, decoder, count in store.family_summary():
        writer.writerow([prefix, decoder, count])
    return buffer.getvalue()


def family_summary_table(store: Store) -> str:
    """Aligned plain-text table of the family summary."""
    rows = [("prefix", "decoder_type", "count")] + [
        (prefix, decoder, str(count)) for prefix, decoder, count in store.family_summary()
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = []
    for idx, row in enumerate(rows):
        lines.append(
            f"{row[0]:<{widths[0]}}  {row[1]:<{widths[1]}}  {row[2]:>{widths[2]}}".rstrip()
        )
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def metrics_csv(store: Store) -> str:
    """UTF-8 CSV with columns exactly: prefix, best_bleu4."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["prefix", "best_bleu4"])
    for prefix, best in store.best_bleu_by_family():
        writer.writerow([prefix, f"{best:.4f}"])
    return buffer.getvalue()
