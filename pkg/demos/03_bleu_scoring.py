"""
Corpus BLEU-4 with the full breakdown
=====================================

Scores are corpus-level: clipped and total n-gram counts are summed over all
segments before any ratio is taken, the brevity penalty uses the closest
reference length per segment, and a missing 4-gram anywhere zeroes the score
(no smoothing).
"""

from capgen import bleu4, tokenize

candidates = [
    tokenize("A man is riding a horse."),
    tokenize("Two dogs play in the snow"),
]
references = [
    [tokenize("a man rides a horse ."), tokenize("A man is riding a horse.")],
    [tokenize("two dogs are playing in snow")],
]

breakdown = bleu4(candidates, references)

print("candidate length:", breakdown.candidate_len)
print("effective reference length:", breakdown.effective_ref_len)
print("brevity penalty:", round(breakdown.brevity_penalty, 4))
for n, (clipped, total) in enumerate(breakdown.precisions, 1):
    print(f"p{n}: {clipped}/{total}")
print("BLEU-4:", round(breakdown.bleu4, 4))

# the classic clipping example: a degenerate candidate cannot farm unigrams
cand = tokenize("the the the the the the the")
refs = [tokenize("the cat is on the mat"), tokenize("there is a cat on the mat")]
degenerate = bleu4([cand], [refs])
clipped, total = degenerate.precisions[0]
print()
print(f"'the the the ...' p1 = {clipped}/{total}, BLEU-4 = {degenerate.bleu4}")
