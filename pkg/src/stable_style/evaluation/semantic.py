"""Greedy-matching similarity of contextual token embeddings.

Every candidate token is matched to its most similar reference token
(precision) and vice versa (recall); F1 combines them. With several
references the best F1 counts. The corpus score is the mean F1 times 100.
"""

from __future__ import annotations

import hashlib
from typing import Callable, List, Sequence

import numpy as np
import torch

from ..errors import InputError

Words = Sequence[str]


class AdapterError(RuntimeError):
    pass


class EncoderStatesAdapter:
    """Per-word contextual vectors from a trained generator's encoder.

    Subword states of one word are averaged, so the output has one row per
    whitespace word.
    """

    def __init__(self, model):
        self.model = model

    def __call__(self, sentences: Sequence[Words]) -> List[np.ndarray]:
        out = []
        for ws in sentences:
            if not ws:
                out.append(np.zeros((0, self.model.cfg.d_model)))
                continue
            states = self.model.encode(ws).double().numpy()
            pieces = self.model.vocab.encode_words(ws)
            rows, i = [], 0
            for p in pieces:
                rows.append(states[i: i + len(p)].mean(axis=0))
                i += len(p)
            out.append(np.stack(rows))
        return out


class RandomVectorAdapter:
    """Context-free stub: each word maps to a fixed pseudo-random unit vector."""

    def __init__(self, dim: int = 32, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def vector(self, word: str) -> np.ndarray:
        h = int.from_bytes(hashlib.sha256(f"{self.seed}:{word}".encode()).digest()[:8], "little")
        v = np.random.default_rng(h).standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def __call__(self, sentences):
        return [np.stack([self.vector(w) for w in ws]) if ws else np.zeros((0, self.dim)) for ws in sentences]


def _normalize(x: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norm == 0, 1.0, norm)


def greedy_f1(cand: np.ndarray, ref: np.ndarray) -> float:
    if len(cand) == 0 or len(ref) == 0:
        return 0.0
    sim = _normalize(cand) @ _normalize(ref).T
    p = sim.max(axis=1).mean()
    r = sim.max(axis=0).mean()
    return 0.0 if p + r == 0 else float(2 * p * r / (p + r))


def semantic_score(adapter: Callable[[Sequence[Words]], List[np.ndarray]], candidates: Sequence[Words],
                   references: Sequence[Sequence[Words]]) -> float:
    """Mean best-reference greedy-matching F1, scaled to 0-100."""
    if len(candidates) != len(references):
        raise InputError(f"{len(candidates)} candidates but {len(references)} reference lists")
    if not candidates:
        raise InputError("semantic score of an empty corpus is undefined")
    flat_refs = [r for refs in references for r in refs]
    try:
        cand_emb = adapter(list(candidates))
        ref_emb = adapter(flat_refs)
    except Exception as e:  # adapters wrap arbitrary encoders
        raise AdapterError(f"semantic adapter failed: {e}") from e
    scores, k = [], 0
    for i, refs in enumerate(references):
        if not refs:
            raise InputError("every candidate needs at least one reference")
        scores.append(max(greedy_f1(cand_emb[i], ref_emb[k + j]) for j in range(len(refs))))
        k += len(refs)
    return 100.0 * float(np.mean(scores))
