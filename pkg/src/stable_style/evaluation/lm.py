"""Causal language models for the fluency metrics.

Perplexity is taken over the whole corpus: exp of the summed token NLL
divided by the summed token count, where each sentence is scored on its
subwords plus the end token.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import random
from dataclasses import asdict, dataclass
from typing import Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError, DivergenceError, InputError
from ..tokenizer import Vocabulary

logger = logging.getLogger(__name__)

Words = Sequence[str]


class SentenceScorer(Protocol):
    def sentence_nll(self, sentences: Sequence[Words]) -> List[Tuple[float, int]]:
        """``(summed NLL in nats, scored token count)`` per sentence."""


def perplexity(lm: SentenceScorer, sentences: Sequence[Words]) -> float:
    if not sentences:
        raise InputError("perplexity of an empty corpus is undefined")
    scores = lm.sentence_nll(sentences)
    nll = math.fsum(s for s, _ in scores)
    n = sum(c for _, c in scores)
    return math.exp(nll / n)


class UniformLM:
    """Assigns probability 1/V to every token; perplexity is exactly V."""

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab

    def sentence_nll(self, sentences):
        lv = math.log(len(self.vocab))
        out = []
        for ws in sentences:
            n = len(self.vocab.encode(ws)) + 1
            out.append((n * lv, n))
        return out


class FileScoredLM:
    """Scores looked up from a JSONL file written by an external scorer.

    Each line holds ``{"text": ..., "nll": ..., "n_tokens": ...}``; this lets a
    pre-trained third-party model supply g-PPL without running it here.
    """

    def __init__(self, path):
        self.table = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    self.table[rec["text"]] = (float(rec["nll"]), int(rec["n_tokens"]))

    def sentence_nll(self, sentences):
        try:
            return [self.table[" ".join(ws)] for ws in sentences]
        except KeyError as e:
            raise InputError(f"no external score for sentence {e.args[0]!r}") from None


@dataclass
class LMConfig:
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 512
    dropout: float = 0.1
    max_len: int = 128
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    held_out_fraction: float = 0.05
    patience: int = 2
    seed: int = 0


class CausalTransformerLM(nn.Module):
    def __init__(self, vocab_size: int, cfg: LMConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(vocab_size, cfg.d_model, padding_idx=Vocabulary.pad_id)
        self.pos_emb = nn.Embedding(cfg.max_len + 1, cfg.d_model)
        layer = nn.TransformerEncoderLayer(cfg.d_model, cfg.n_heads, cfg.d_ff, cfg.dropout, batch_first=True)
        self.body = nn.TransformerEncoder(layer, cfg.n_layers, enable_nested_tensor=False)
        self.out = nn.Linear(cfg.d_model, vocab_size)
        # an untrained model predicts the uniform distribution
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, ids: torch.Tensor, pad: torch.Tensor) -> torch.Tensor:
        T = ids.size(1)
        x = self.tok_emb(ids) + self.pos_emb(torch.arange(T))[None]
        causal = torch.ones((T, T), dtype=torch.bool).triu(1)
        return self.out(self.body(x, mask=causal, src_key_padding_mask=pad))


class TransformerLM:
    def __init__(self, vocab: Vocabulary, cfg: Optional[LMConfig] = None):
        self.vocab = vocab
        self.cfg = cfg or LMConfig()
        self.model = CausalTransformerLM(len(vocab), self.cfg)
        self.model.eval()
        self.history: List[dict] = []

    def _batch(self, id_lists):
        T = min(max(len(s) for s in id_lists), self.cfg.max_len) + 1
        inp = torch.full((len(id_lists), T), Vocabulary.pad_id, dtype=torch.long)
        gold = torch.full((len(id_lists), T), -100, dtype=torch.long)
        for b, s in enumerate(id_lists):
            s = s[: self.cfg.max_len]
            inp[b, 0] = Vocabulary.start_id
            inp[b, 1: len(s) + 1] = torch.as_tensor(s, dtype=torch.long)
            gold[b, : len(s)] = torch.as_tensor(s, dtype=torch.long)
            gold[b, len(s)] = Vocabulary.end_id
        pad = gold == -100
        return inp, gold, pad

    def _nll(self, id_lists) -> torch.Tensor:
        inp, gold, pad = self._batch(id_lists)
        logits = self.model(inp, pad)
        return F.cross_entropy(logits.transpose(1, 2), gold, ignore_index=-100, reduction="none").sum(1)

    @torch.no_grad()
    def sentence_nll(self, sentences, batch_size: int = 128):
        self.model.eval()
        ids = [self.vocab.encode(ws)[: self.cfg.max_len] for ws in sentences]
        out = []
        for i in range(0, len(ids), batch_size):
            chunk = ids[i: i + batch_size]
            nll = self._nll(chunk).double().tolist()
            out.extend((v, len(s) + 1) for v, s in zip(nll, chunk))
        return out

    def save(self, path, **extra):
        torch.save({"kind": "lm", "config": asdict(self.cfg), "vocab_hash": self.vocab.digest(),
                    "state_dict": self.model.state_dict(), "history": self.history, **extra}, path)

    @classmethod
    def load(cls, path, vocab: Vocabulary) -> "TransformerLM":
        blob = torch.load(path, map_location="cpu", weights_only=False)
        if blob.get("kind") != "lm":
            raise ConfigError(f"{path} is not a language-model checkpoint")
        if blob["vocab_hash"] != vocab.digest():
            raise ConfigError(f"{path} was trained against a different vocabulary")
        lm = cls(vocab, LMConfig(**blob["config"]))
        lm.model.load_state_dict(blob["state_dict"])
        lm.model.eval()
        lm.history = blob.get("history", [])
        return lm


def train_lm(sentences: Iterable, vocab: Vocabulary, cfg: Optional[LMConfig] = None) -> TransformerLM:
    """Fit a causal LM, early-stopping on held-out perplexity.

    ``sentences`` may be a DatasetSplit (all styles pooled) or word lists.
    """
    cfg = cfg or LMConfig()
    data = [list(getattr(s, "tokens", s)) for s in sentences]
    if not data:
        raise InputError("cannot train a language model on an empty corpus")
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    order = list(range(len(data)))
    rng.shuffle(order)
    n_held = int(len(data) * cfg.held_out_fraction)
    held = [data[i] for i in order[:n_held]] or [data[i] for i in order]
    train = [vocab.encode(data[i]) for i in order[n_held:]] or [vocab.encode(d) for d in data]

    lm = TransformerLM(vocab, cfg)
    opt = torch.optim.Adam(lm.model.parameters(), lr=cfg.learning_rate)
    gen = torch.Generator().manual_seed(cfg.seed)
    best, best_state, bad = float("inf"), copy.deepcopy(lm.model.state_dict()), 0
    for epoch in range(cfg.epochs):
        lm.model.train()
        perm = torch.randperm(len(train), generator=gen).tolist()
        for i in range(0, len(perm), cfg.batch_size):
            chunk = [train[j] for j in perm[i: i + cfg.batch_size]]
            n_tok = sum(len(s) + 1 for s in chunk)
            loss = lm._nll(chunk).sum() / n_tok
            if not torch.isfinite(loss):
                raise DivergenceError(f"language model loss became {loss.item()} in epoch {epoch + 1}")
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(lm.model.parameters(), 1.0)
            opt.step()
        ppl = perplexity(lm, held)
        lm.history.append({"epoch": epoch + 1, "held_out_ppl": ppl})
        logger.info("lm epoch %d held-out ppl %.3f", epoch + 1, ppl)
        if ppl < best - 1e-9:
            best, best_state, bad = ppl, copy.deepcopy(lm.model.state_dict()), 0
        else:
            bad += 1
            if bad >= cfg.patience:
                break
    lm.model.load_state_dict(best_state)
    lm.model.zero_grad(set_to_none=True)
    lm.model.eval()
    return lm
