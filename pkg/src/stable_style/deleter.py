"""Classifier-guided deletion of style attribute markers.

Each round scores every remaining word by how much the source-style
probability falls when that word is occluded, and removes the top scorer.
The loop stops once the style probability drops under ``alpha``, once another
deletion would leave fewer than ``beta`` of the original words, or when a
single word is left.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, List, Protocol, Sequence

import numpy as np

from .corpus import StyledSentence
from .errors import InputError

ALPHA_REACHED = "alpha_reached"
BETA_FLOOR = "beta_floor"
EXHAUSTED = "exhausted"


class StyleScorer(Protocol):
    """Anything mapping word sequences to style distributions, one row per sentence."""

    def proba_words(self, sentences: Sequence[Sequence[str]]) -> np.ndarray: ...


@dataclass(frozen=True)
class DeleterConfig:
    alpha: float = 0.7
    beta: float = 0.5

    def __post_init__(self):
        if not 0 <= self.alpha <= 1 or not 0 <= self.beta <= 1:
            raise InputError(f"alpha and beta must lie in [0, 1], got ({self.alpha}, {self.beta})")


@dataclass
class DeletionStep:
    word_index: int  # position in the source sentence
    word: str
    importance_score: float
    prob_before: float
    prob_after: float


@dataclass
class DeletionTrace:
    source: List[str]
    style: int
    steps: List[DeletionStep] = field(default_factory=list)
    content: List[str] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def deleted(self) -> List[str]:
        return [s.word for s in self.steps]

    def to_record(self) -> dict:
        return {"source": " ".join(self.source), "style": self.style,
                "content": " ".join(self.content), "stop_reason": self.stop_reason,
                "steps": [asdict(s) for s in self.steps]}

    @classmethod
    def from_record(cls, rec: dict) -> "DeletionTrace":
        return cls(rec["source"].split(), rec["style"], [DeletionStep(**s) for s in rec["steps"]],
                   rec["content"].split(), rec["stop_reason"])


def importance_scores(scorer: StyleScorer, words: Sequence[str], style: int) -> np.ndarray:
    """Probability drop for the target style when each word is removed in turn."""
    if not words:
        raise InputError("importance scores need at least one word")
    words = list(words)
    if len(words) == 1:
        # occluding the only word leaves nothing to classify
        raise InputError("cannot occlude the only word of a sentence")
    batch = [words] + [words[:i] + words[i + 1:] for i in range(len(words))]
    p = scorer.proba_words(batch)[:, style]
    return p[0] - p[1:]


def delete(scorer: StyleScorer, sentence: StyledSentence, cfg: DeleterConfig) -> DeletionTrace:
    words = list(sentence.tokens)
    if not words:
        raise InputError("cannot delete from an empty sentence")
    style = sentence.style
    n_orig = len(words)
    positions = list(range(n_orig))
    trace = DeletionTrace(list(words), style)
    p = float(scorer.proba_words([words])[0, style])
    while True:
        if p < cfg.alpha:
            trace.stop_reason = ALPHA_REACHED
            break
        if (len(words) - 1) / n_orig < cfg.beta:
            trace.stop_reason = BETA_FLOOR
            break
        if len(words) == 1:
            trace.stop_reason = EXHAUSTED
            break
        occluded = [words[:i] + words[i + 1:] for i in range(len(words))]
        probs = scorer.proba_words(occluded)[:, style]
        scores = p - probs
        i = int(np.argmax(scores))  # first maximum -> leftmost on ties
        p_next = float(probs[i])
        trace.steps.append(DeletionStep(positions[i], words[i], float(scores[i]), p, p_next))
        del words[i], positions[i]
        p = p_next
    trace.content = words
    return trace


def delete_many(scorer: StyleScorer, sentences: Iterable[StyledSentence], cfg: DeleterConfig) -> List[DeletionTrace]:
    return [delete(scorer, s, cfg) for s in sentences]


def write_traces(traces: Iterable[DeletionTrace], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(json.dumps(t.to_record(), ensure_ascii=False) + "\n")


def read_traces(path) -> List[DeletionTrace]:
    with open(path, encoding="utf-8") as fh:
        return [DeletionTrace.from_record(json.loads(line)) for line in fh if line.strip()]
