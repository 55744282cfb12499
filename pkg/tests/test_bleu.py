import math
import random

import pytest

from capgen.bleu import BleuBreakdown, bleu4, brevity_penalty, modified_precision, tokenize


# ---------------------------------------------------------------------------
# Independent brute-force oracle. Deliberately written with plain loops and
# dicts (no Counter, no shared helpers) so it cannot inherit a bug from the
# implementation under test.
# ---------------------------------------------------------------------------

def _oracle_ngrams(tokens, n):
    grams = []
    for i in range(len(tokens)):
        if i + n <= len(tokens):
            grams.append(tuple(tokens[i:i + n]))
    return grams


def _oracle_clipped_total(candidates, references, n):
    clipped = 0
    total = 0
    for cand, refs in zip(candidates, references):
        cand_counts = {}
        for gram in _oracle_ngrams(cand, n):
            cand_counts[gram] = cand_counts.get(gram, 0) + 1
        for gram, count in cand_counts.items():
            best_ref = 0
            for ref in refs:
                ref_count = 0
                for rgram in _oracle_ngrams(ref, n):
                    if rgram == gram:
                        ref_count += 1
                if ref_count > best_ref:
                    best_ref = ref_count
            clipped += min(count, best_ref)
            total += count
    return clipped, total


def _oracle_bleu4(candidates, references):
    ratios = []
    for n in (1, 2, 3, 4):
        clipped, total = _oracle_clipped_total(candidates, references, n)
        if total == 0 or clipped == 0:
            return 0.0
        ratios.append(clipped / total)
    cand_len = 0
    ref_len = 0
    for cand, refs in zip(candidates, references):
        cand_len += len(cand)
        best = None
        for ref in refs:
            key = (abs(len(ref) - len(cand)), len(ref))
            if best is None or key < best:
                best = key
        ref_len += best[1]
    if cand_len > ref_len:
        bp = 1.0
    elif cand_len == 0:
        bp = 0.0
    else:
        bp = math.exp(1.0 - ref_len / cand_len)
    geo = math.exp(sum(math.log(r) for r in ratios) / 4.0)
    return bp * geo


def _random_corpus(rng, max_segments=5, max_len=12, vocab=10):
    words = [f"w{i}" for i in range(vocab)]
    segments = rng.randint(1, max_segments)
    candidates = []
    references = []
    for _ in range(segments):
        candidates.append([rng.choice(words) for _ in range(rng.randint(1, max_len))])
        refs = []
        for _ in range(rng.randint(1, 3)):
            refs.append([rng.choice(words) for _ in range(rng.randint(1, max_len))])
        references.append(refs)
    return candidates, references


# ---------------------------------------------------------------------------
# tokenize
# ---------------------------------------------------------------------------

def test_tokenize_splits_punctuation():
    assert tokenize("A man riding a horse.") == ["a", "man", "riding", "a", "horse", "."]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_apostrophe():
    assert tokenize("Don't stop") == ["don", "'", "t", "stop"]


def test_tokenize_no_empty_tokens():
    rng = random.Random(13)
    chars = "ab c.,'!-\t\nXY9"
    for _ in range(200):
        text = "".join(rng.choice(chars) for _ in range(rng.randint(0, 30)))
        assert all(tok for tok in tokenize(text))


# ---------------------------------------------------------------------------
# modified_precision
# ---------------------------------------------------------------------------

def test_clipping_the_the_case():
    cand = "the the the the the the the".split()
    refs = ["the cat is on the mat".split(), "there is a cat on the mat".split()]
    assert modified_precision([cand], [refs], 1) == (2, 7)


def test_identity_candidate():
    cand = "a b c d e".split()
    for n in (1, 2, 3, 4):
        total = len(cand) - n + 1
        assert modified_precision([cand], [[cand]], n) == (total, total)


def test_no_overlap():
    cand = "x y z".split()
    refs = [["p", "q", "r"]]
    assert modified_precision([cand], [refs], 1) == (0, 3)


def test_mismatched_lengths_rejected():
    with pytest.raises(ValueError):
        modified_precision([["a"]], [], 1)


# ---------------------------------------------------------------------------
# brevity_penalty
# ---------------------------------------------------------------------------

def test_bp_equal_lengths():
    assert brevity_penalty(10, 10) == 1.0


def test_bp_short_candidate():
    assert brevity_penalty(4, 5) == pytest.approx(math.exp(-0.25), abs=1e-12)


def test_bp_long_candidate():
    assert brevity_penalty(12, 5) == 1.0


def test_bp_empty_candidate():
    assert brevity_penalty(0, 5) == 0.0


def test_bp_zero_reference_rejected():
    with pytest.raises(ValueError):
        brevity_penalty(3, 0)


# ---------------------------------------------------------------------------
# bleu4
# ---------------------------------------------------------------------------

def test_perfect_match_scores_exactly_one():
    candidates = ["a man rides a horse".split(), "two dogs play in snow".split()]
    references = [[candidates[0]], [candidates[1]]]
    breakdown = bleu4(candidates, references)
    assert breakdown.bleu4 == 1.0
    assert breakdown.brevity_penalty == 1.0


def test_single_pair_breakdown():
    cand = "a b c d".split()
    ref = "a b c d e".split()
    breakdown = bleu4([cand], [[ref]])
    assert breakdown.precisions == ((4, 4), (3, 3), (2, 2), (1, 1))
    assert breakdown.candidate_len == 4
    assert breakdown.effective_ref_len == 5
    assert breakdown.brevity_penalty == pytest.approx(math.exp(-0.25), abs=1e-12)
    # frozen from the oracle: bp * 1.0
    assert breakdown.bleu4 == pytest.approx(0.7788007830714049, abs=1e-12)


def test_zero_when_any_order_unmatched():
    cand = "a b c d e".split()
    ref = "a x b y c z d".split()  # shares unigrams, no 4-gram
    breakdown = bleu4([cand], [[ref]])
    assert breakdown.bleu4 == 0.0


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        bleu4([], [])


def test_candidate_without_references_rejected():
    with pytest.raises(ValueError):
        bleu4([["a"]], [[]])


def test_permutation_invariance():
    rng = random.Random(99)
    candidates, references = _random_corpus(rng)
    order = list(range(len(candidates)))
    rng.shuffle(order)
    shuffled_c = [candidates[i] for i in order]
    shuffled_r = [references[i] for i in order]
    assert bleu4(candidates, references).bleu4 == pytest.approx(
        bleu4(shuffled_c, shuffled_r).bleu4, abs=1e-12
    )


def test_duplicating_capped_token_never_raises_unigram_precision():
    # Duplicating a token already at its reference cap only dilutes p1: the
    # clipped count cannot grow past the cap while the total keeps growing.
    rng = random.Random(7)
    for _ in range(50):
        candidates, references = _random_corpus(rng)
        seg = rng.randrange(len(candidates))
        token = rng.choice(candidates[seg])
        cap = max(ref.count(token) for ref in references[seg])
        padded = list(candidates[seg])
        while padded.count(token) < cap:
            padded.append(token)
        mutated = list(candidates)
        mutated[seg] = padded
        before_clip, before_total = modified_precision(mutated, references, 1)
        mutated[seg] = padded + [token]
        after_clip, after_total = modified_precision(mutated, references, 1)
        assert after_total == before_total + 1
        assert after_clip == before_clip
        assert after_clip * before_total <= before_clip * after_total


def test_oracle_equivalence_on_random_micro_corpora():
    rng = random.Random(20240817)
    for _ in range(150):
        candidates, references = _random_corpus(rng)
        got = bleu4(candidates, references)
        want = _oracle_bleu4(candidates, references)
        assert got.bleu4 == pytest.approx(want, abs=1e-9)
        assert 0.0 <= got.bleu4 <= 1.0
        assert isinstance(got, BleuBreakdown)
