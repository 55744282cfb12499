"""Recover candidate source from raw LLM output.

The sanitize pipeline applies a fixed sequence of fix-up passes:

    extract_blocks -> select_candidate -> strip_think_segments ->
    strip_fence_lines -> normalize_imports -> enforce_hyperparameters ->
    balance_brackets -> syntax_check

Every pass is a pure text transformation; a syntax failure is encoded in the
result rather than raised, so the caller decides whether to enter repair mode.
"""

import ast
import re
from dataclasses import dataclass, field

DEFAULT_REQUIRED_IMPORTS = ("import torch", "import torch.nn as nn")

CANONICAL_HYPERPARAMETERS = "def supported_hyperparameters():\n    return {'lr', 'momentum'}"

ORIGIN_FENCED = "fenced-block"
ORIGIN_FALLBACK = "whole-text-fallback"

_FENCE_OPEN_RE = re.compile(r"^\s*(`{3,}|~{3,})\s*(.*)$")
_FENCE_LINE_RE = re.compile(r"^\s*(?:`{3,}|~{3,})\s*[\w+.-]*\s*$")
_NET_CLASS_RE = re.compile(r"^\s*class\s+Net\b", re.MULTILINE)
_THINK_SPAN_RE = re.compile(r"<think>.*?</think>", re.DOTALL)
_THINK_OPEN_RE = re.compile(r"<think>.*\Z", re.DOTALL)
_HYPERPARAMETERS_DEF_RE = re.compile(r"^def\s+supported_hyperparameters\s*\(", re.MULTILINE)
_IMPORT_LINE_RE = re.compile(r"^(?:import|from)\s+\S")

_OPENERS = {"(": ")", "[": "]", "{": "}"}
_CLOSERS = {")": "(", "]": "[", "}": "{"}


@dataclass(frozen=True)
class SyntaxFailure:
    line: int
    column: int
    message: str


@dataclass(frozen=True)
class PassEntry:
    name: str
    changed: bool
    detail: str


@dataclass
class CandidateSource:
    """Sanitized source plus a pass-by-pass audit trail."""

    text: str
    pass_log: list[PassEntry] = field(default_factory=list)
    origin: str = ORIGIN_FALLBACK
    syntax_failure: SyntaxFailure | None = None

    @property
    def ok(self) -> bool:
        return self.syntax_failure is None


def _is_closing_fence(line: str, char: str, min_len: int) -> bool:
    s = line.strip()
    return len(s) >= min_len and set(s) == {char}


def _scan_blocks(raw: str) -> tuple[list[tuple[str, str]], bool]:
    blocks: list[tuple[str, str]] = []
    lines = raw.split("\n")
    i = 0
    while i < len(lines):
        m = _FENCE_OPEN_RE.match(lines[i])
        if not m:
            i += 1
            continue
        marker = m.group(1)
        info = m.group(2).strip()
        body: list[str] = []
        i += 1
        while i < len(lines):
            if _is_closing_fence(lines[i], marker[0], len(marker)):
                i += 1
                break
            body.append(lines[i])
            i += 1
        blocks.append((info, "\n".join(body)))
    if not blocks:
        return [("", raw)], False
    return blocks, True


def extract_blocks(raw: str) -> list[tuple[str, str]]:
    """All maximal fenced blocks in document order as (info_string, text).

    Backtick and tilde fences of three or more characters open a block; an
    unterminated fence extends to EOF. When the text contains no fences at
    all, a single whole-text fallback entry is returned.
    """
    blocks, _ = _scan_blocks(raw)
    return blocks


def select_candidate(blocks: list[tuple[str, str]]) -> str:
    """Pick the most likely complete candidate block.

    Blocks declaring ``class Net`` take priority; among those the longest
    wins, ties resolving to the earliest. Without a Net block, the longest
    block wins.
    """
    if not blocks:
        raise ValueError("no blocks to select from")
    texts = [text for _info, text in blocks]
    net_blocks = [text for text in texts if _NET_CLASS_RE.search(text)]
    pool = net_blocks or texts
    return max(pool, key=len)


def strip_think_segments(text: str) -> str:
    """Drop <think>...</think> spans; an unterminated opener removes to EOF."""
    text = _THINK_SPAN_RE.sub("", text)
    return _THINK_OPEN_RE.sub("", text)


def strip_fence_lines(text: str) -> str:
    """Drop residual lines that are nothing but a fence marker (plus info word)."""
    lines = text.split("\n")
    kept = [line for line in lines if not _FENCE_LINE_RE.match(line)]
    if len(kept) == len(lines):
        return text
    return "\n".join(kept)


def normalize_imports(text: str, required: tuple[str, ...] = DEFAULT_REQUIRED_IMPORTS) -> str:
    """Ensure each required import line appears exactly once, at the top."""
    wanted = set(required)
    body = [line for line in text.split("\n") if line.strip() not in wanted]
    return "\n".join(list(required) + body)


def _is_exact_hyperparameters(node: ast.FunctionDef | ast.AsyncFunctionDef) -> bool:
    args = node.args
    if args.args or args.posonlyargs or args.kwonlyargs or args.vararg or args.kwarg:
        return False
    if len(node.body) != 1 or not isinstance(node.body[0], ast.Return):
        return False
    value = node.body[0].value
    if not isinstance(value, ast.Set) or len(value.elts) != 2:
        return False
    literals = {elt.value for elt in value.elts if isinstance(elt, ast.Constant)}
    return literals == {"lr", "momentum"}


def _insertion_line_after_imports(lines: list[str]) -> int:
    idx = 0
    for i, line in enumerate(lines):
        if _IMPORT_LINE_RE.match(line):
            idx = i + 1
        elif line.strip() and not line.strip().startswith("#"):
            break
    return idx


def _insert_definition(text: str, definition: str) -> str:
    lines = text.split("\n")
    at = _insertion_line_after_imports(lines)
    block = definition.split("\n")
    if at > 0:
        block = ["", ""] + block
    if at < len(lines) and lines[at].strip():
        block = block + ["", ""]
    elif at >= len(lines):
        block = block + [""]
    return "\n".join(lines[:at] + block + lines[at:])


def _rewrite_span(text: str, start_line: int, end_line: int, replacement: str) -> str:
    # start_line/end_line are 1-based inclusive source lines
    lines = text.split("\n")
    return "\n".join(lines[: start_line - 1] + replacement.split("\n") + lines[end_line:])


def _consume_def_block(lines: list[str], start: int) -> int:
    """Index one past the last line of the def block starting at `start`."""
    i = start + 1
    last_code = start
    while i < len(lines):
        line = lines[i]
        if line.strip() and not line[0].isspace():
            break
        if line.strip():
            last_code = i
        i += 1
    return last_code + 1


def enforce_hyperparameters(text: str) -> str:
    """Force a top-level supported_hyperparameters() returning {'lr', 'momentum'}.

    When the source parses, the function span is rewritten at the AST level
    (all top-level definitions of that name); otherwise a regex-span fallback
    rewrites the first textual definition. A missing function is inserted
    after the leading imports.
    """
    try:
        tree = ast.parse(text)
    except SyntaxError:
        m = _HYPERPARAMETERS_DEF_RE.search(text)
        if m is None:
            return _insert_definition(text, CANONICAL_HYPERPARAMETERS)
        lines = text.split("\n")
        start = text.count("\n", 0, m.start())
        end = _consume_def_block(lines, start)
        return "\n".join(lines[:start] + CANONICAL_HYPERPARAMETERS.split("\n") + lines[end:])

    targets = [
        node
        for node in tree.body
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef))
        and node.name == "supported_hyperparameters"
    ]
    if not targets:
        return _insert_definition(text, CANONICAL_HYPERPARAMETERS)
    for node in reversed(targets):
        if _is_exact_hyperparameters(node):
            continue
        start = node.lineno
        if node.decorator_list:
            start = node.decorator_list[0].lineno
        text = _rewrite_span(text, start, node.end_lineno, CANONICAL_HYPERPARAMETERS)
    return text


def _scan_brackets(text: str) -> tuple[list[str], int, bool]:
    """Bracket state outside string literals and comments.

    Returns (open stack, unmatched closer count, EOF-inside-string flag).
    Recognizes single/double/triple quotes, escapes, and hash comments; an
    unterminated single-quoted string ends at the newline, as the tokenizer
    would treat it.
    """
    stack: list[str] = []
    unmatched_closers = 0
    in_string: str | None = None
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if in_string is not None:
            if ch == "\\":
                i += 2
                continue
            if text.startswith(in_string, i):
                i += len(in_string)
                in_string = None
                continue
            if ch == "\n" and len(in_string) == 1:
                in_string = None
            i += 1
            continue
        if ch == "#":
            nl = text.find("\n", i)
            i = n if nl < 0 else nl
            continue
        if ch in ("'", '"'):
            if text.startswith(ch * 3, i):
                in_string = ch * 3
                i += 3
            else:
                in_string = ch
                i += 1
            continue
        if ch in _OPENERS:
            stack.append(ch)
        elif ch in _CLOSERS:
            if stack and stack[-1] == _CLOSERS[ch]:
                stack.pop()
            else:
                unmatched_closers += 1
        i += 1
    return stack, unmatched_closers, in_string is not None


def balance_brackets(text: str) -> str:
    """Append closers for unmatched (, [, { at EOF, in correct nesting order.

    Brackets inside string literals and comments are ignored. Unmatched
    closers are left untouched. When EOF falls inside an unterminated string
    literal nothing is appended: closers would land inside the literal.
    """
    stack, _unmatched, eof_in_string = _scan_brackets(text)
    if not stack or eof_in_string:
        return text
    return text + "".join(_OPENERS[ch] for ch in reversed(stack))


def syntax_check(text: str) -> SyntaxFailure | None:
    """None when the text parses; otherwise the failure location and message."""
    try:
        ast.parse(text)
    except SyntaxError as exc:
        return SyntaxFailure(
            line=exc.lineno or 0,
            column=exc.offset or 0,
            message=exc.msg or "invalid syntax",
        )
    return None


def sanitize(raw: str, required_imports: tuple[str, ...] = DEFAULT_REQUIRED_IMPORTS) -> CandidateSource:
    """Run the full fix-up pipeline over raw LLM output.

    Idempotent: feeding the sanitized text back through produces the same
    bytes. The pass log records every pass exactly once, in execution order.
    """
    log: list[PassEntry] = []

    blocks, fenced = _scan_blocks(raw)
    origin = ORIGIN_FENCED if fenced else ORIGIN_FALLBACK
    log.append(PassEntry("extract_blocks", fenced, f"{len(blocks)} block(s), origin={origin}"))

    text = select_candidate(blocks)
    log.append(PassEntry("select_candidate", text != raw, f"{len(text)} chars selected"))

    stripped = strip_think_segments(text)
    log.append(PassEntry("strip_think_segments", stripped != text, "think spans removed" if stripped != text else "no think spans"))
    text = stripped

    defenced = strip_fence_lines(text)
    log.append(PassEntry("strip_fence_lines", defenced != text, "residual fence lines dropped" if defenced != text else "no residual fences"))
    text = defenced

    normalized = normalize_imports(text, required_imports)
    log.append(PassEntry("normalize_imports", normalized != text, "required imports pinned to top"))
    text = normalized

    enforced = enforce_hyperparameters(text)
    log.append(PassEntry("enforce_hyperparameters", enforced != text, "hyperparameter set rewritten" if enforced != text else "already exact"))
    text = enforced

    balanced = balance_brackets(text)
    appended = len(balanced) - len(text)
    log.append(PassEntry("balance_brackets", balanced != text, f"{appended} closer(s) appended" if appended else "balanced"))
    text = balanced

    failure = syntax_check(text)
    log.append(PassEntry("syntax_check", False, "ok" if failure is None else f"line {failure.line}: {failure.message}"))

    return CandidateSource(text=text, pass_log=log, origin=origin, syntax_failure=failure)
