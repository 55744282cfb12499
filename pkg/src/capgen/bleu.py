"""Corpus-level BLEU-4: modified n-gram precisions, brevity penalty, no smoothing."""

import math
import re
from collections import Counter
from dataclasses import dataclass

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(caption: str) -> list[str]:
    """Lowercase a caption and split it into word and punctuation tokens."""
    return _TOKEN_RE.findall(caption.lower())


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def modified_precision(candidates, references, n):
    """Corpus-level clipped n-gram counts.

    `candidates` is a list of token sequences; `references` is a parallel list
    of reference sets (each a list of token sequences). Each candidate n-gram
    count is clipped by its maximum count over that segment's references, and
    the clipped/total sums are accumulated over the whole corpus before any
    ratio is taken.

    Returns (clipped_matches, candidate_ngrams).
    """
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    if not 1 <= n <= 4:
        raise ValueError(f"n must be in 1..4, got {n}")
    clipped = 0
    total = 0
    for cand, refs in zip(candidates, references):
        counts = _ngram_counts(cand, n)
        if not counts:
            continue
        max_counts: Counter = Counter()
        for ref in refs:
            for gram, count in _ngram_counts(ref, n).items():
                if count > max_counts[gram]:
                    max_counts[gram] = count
        total += sum(counts.values())
        clipped += sum(min(count, max_counts[gram]) for gram, count in counts.items())
    return clipped, total


def brevity_penalty(candidate_len: int, effective_ref_len: int) -> float:
    """1 for candidates at least as long as the reference, exp(1 - r/c) below."""
    if effective_ref_len <= 0:
        raise ValueError("effective reference length must be positive")
    if candidate_len == 0:
        return 0.0
    if candidate_len > effective_ref_len:
        return 1.0
    return math.exp(1.0 - effective_ref_len / candidate_len)


def _closest_ref_len(candidate_len: int, refs) -> int:
    # closest reference length; ties broken toward the shorter reference
    return min((len(ref) for ref in refs), key=lambda rl: (abs(rl - candidate_len), rl))


@dataclass(frozen=True)
class BleuBreakdown:
    """Per-order (clipped, total) pairs plus the assembled corpus score."""

    precisions: tuple[tuple[int, int], ...]
    candidate_len: int
    effective_ref_len: int
    brevity_penalty: float
    bleu4: float


def bleu4(candidates, references) -> BleuBreakdown:
    """Corpus BLEU-4 with uniform 1/4 weights and no smoothing.

    The score is 0 whenever any order has zero clipped matches (or the
    candidate is too short to produce that order at all).
    """
    if not candidates:
        raise ValueError("empty corpus")
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    if any(not refs for refs in references):
        raise ValueError("candidate with zero references")

    pairs = tuple(modified_precision(candidates, references, n) for n in range(1, 5))
    candidate_len = sum(len(cand) for cand in candidates)
    effective_ref_len = sum(
        _closest_ref_len(len(cand), refs) for cand, refs in zip(candidates, references)
    )
    bp = brevity_penalty(candidate_len, effective_ref_len)
    if any(clipped == 0 or total == 0 for clipped, total in pairs):
        score = 0.0
    else:
        log_sum = math.fsum(0.25 * math.log(clipped / total) for clipped, total in pairs)
        score = bp * math.exp(log_sum)
    return BleuBreakdown(pairs, candidate_len, effective_ref_len, bp, score)
