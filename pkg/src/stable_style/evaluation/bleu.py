"""Corpus BLEU over pre-tokenized word lists.

4-gram precisions are clipped against the per-n-gram maximum over all
references. The brevity penalty uses the closest reference length (shorter
wins a tie). An n-gram order with zero matches contributes ``epsilon / total``
instead of zero.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import List, Sequence, Tuple

from ..errors import InputError

Words = Sequence[str]


def ngrams(words: Words, n: int) -> Counter:
    return Counter(tuple(words[i: i + n]) for i in range(len(words) - n + 1))


def closest_ref_length(hyp_len: int, ref_lens: Sequence[int]) -> int:
    return min(ref_lens, key=lambda r: (abs(r - hyp_len), r))


def corpus_stats(candidates: Sequence[Words], references: Sequence[Sequence[Words]],
                 max_n: int = 4) -> Tuple[List[int], List[int], int, int]:
    if len(candidates) != len(references):
        raise InputError(f"{len(candidates)} candidates but {len(references)} reference lists")
    correct = [0] * max_n
    total = [0] * max_n
    sys_len = ref_len = 0
    for cand, refs in zip(candidates, references):
        if not refs:
            raise InputError("every candidate needs at least one reference")
        cand = list(cand)
        sys_len += len(cand)
        ref_len += closest_ref_length(len(cand), [len(r) for r in refs])
        for n in range(1, max_n + 1):
            counts = ngrams(cand, n)
            max_ref: Counter = Counter()
            for r in refs:
                for g, c in ngrams(list(r), n).items():
                    if c > max_ref[g]:
                        max_ref[g] = c
            correct[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            total[n - 1] += max(len(cand) - n + 1, 0)
    return correct, total, sys_len, ref_len


def bleu_from_stats(correct, total, sys_len: int, ref_len: int, epsilon: float = 0.1) -> float:
    if sys_len == 0 or not any(correct):
        return 0.0
    log_p = 0.0
    for c, t in zip(correct, total):
        if t == 0:
            return 0.0
        log_p += math.log((c if c > 0 else epsilon) / t)
    bp = 1.0 if sys_len >= ref_len else math.exp(1 - ref_len / sys_len)
    return 100.0 * bp * math.exp(log_p / len(correct))


def bleu_corpus(candidates: Sequence[Words], references: Sequence[Sequence[Words]],
                max_n: int = 4, epsilon: float = 0.1) -> float:
    """Corpus-level BLEU in [0, 100]."""
    return bleu_from_stats(*corpus_stats(candidates, references, max_n), epsilon=epsilon)


def self_bleu(outputs: Sequence[Words], sources: Sequence[Words]) -> float:
    return bleu_corpus(outputs, [[s] for s in sources])


def geometric_mean(a: float, b: float) -> float:
    if a <= 0 or b <= 0:
        raise InputError(f"geometric mean needs positive inputs, got ({a}, {b})")
    return math.sqrt(a * b)
