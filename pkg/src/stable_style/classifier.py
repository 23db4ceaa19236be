"""Convolutional style classifier (max-over-time pooling over several widths).

The same network serves three roles: the occlusion scorer for deletion, the
frozen critic behind the style loss (through :meth:`StyleClassifier.predict_proba_soft`),
and, trained with another seed and other widths, the evaluation classifier.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import DatasetSplit
from .errors import ConfigError, InputError, TrainingError
from .tokenizer import Vocabulary

logger = logging.getLogger(__name__)


@dataclass
class ClassifierConfig:
    filter_widths: List[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    maps_per_filter: int = 100
    embed_dim: int = 256
    dropout: float = 0.5
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not self.filter_widths or any(w <= 0 for w in self.filter_widths):
            raise ConfigError(f"filter widths must be positive: {self.filter_widths}")
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"dropout must lie in [0, 1): {self.dropout}")

    @classmethod
    def evaluation_default(cls, seed: int = 1) -> "ClassifierConfig":
        return cls(filter_widths=[2, 3, 4], seed=seed)


class TextCNN(nn.Module):
    def __init__(self, vocab_size: int, n_styles: int, cfg: ClassifierConfig):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, cfg.embed_dim, padding_idx=Vocabulary.pad_id)
        self.convs = nn.ModuleList(nn.Conv1d(cfg.embed_dim, cfg.maps_per_filter, w) for w in cfg.filter_widths)
        self.widths = list(cfg.filter_widths)
        self.dropout = nn.Dropout(cfg.dropout)
        self.out = nn.Linear(cfg.maps_per_filter * len(cfg.filter_widths), n_styles)

    @property
    def min_len(self) -> int:
        return max(self.widths)

    def forward_embedded(self, emb: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """Logits for ``emb`` of shape (batch, time, dim).

        ``lengths`` are the effective lengths (already raised to the widest
        filter); windows reaching past them are masked out of the max-pool, so
        extra batch padding never changes a row's result.
        """
        x = emb.transpose(1, 2)
        pooled = []
        for w, conv in zip(self.widths, self.convs):
            h = F.relu(conv(x))
            n_win = h.size(2)
            valid = torch.arange(n_win, device=h.device)[None, :] <= (lengths[:, None] - w)
            h = h.masked_fill(~valid[:, None, :], float("-inf"))
            pooled.append(h.max(dim=2).values)
        return self.out(self.dropout(torch.cat(pooled, dim=1)))

    def forward(self, ids: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        return self.forward_embedded(self.embedding(ids), lengths)


class StyleClassifier:
    """A trained :class:`TextCNN` bound to its vocabulary."""

    def __init__(self, vocab: Vocabulary, cfg: ClassifierConfig, n_styles: Optional[int] = None,
                 model: Optional[TextCNN] = None):
        self.vocab = vocab
        self.cfg = cfg
        self.n_styles = n_styles or len(vocab.styles)
        self.model = model or TextCNN(len(vocab), self.n_styles, cfg)
        self.model.eval()
        self.history: List[dict] = []

    @property
    def vocab_hash(self) -> str:
        return self.vocab.digest()

    def freeze(self) -> "StyleClassifier":
        for p in self.model.parameters():
            p.requires_grad_(False)
        self.model.eval()
        return self

    def _batch(self, seqs: Sequence[Sequence[int]]):
        if any(len(s) == 0 for s in seqs):
            raise InputError("cannot classify an empty sequence")
        lengths = [max(len(s), self.model.min_len) for s in seqs]
        T = max(lengths)
        ids = torch.full((len(seqs), T), Vocabulary.pad_id, dtype=torch.long)
        for i, s in enumerate(seqs):
            ids[i, : len(s)] = torch.as_tensor(list(s), dtype=torch.long)
        return ids, torch.as_tensor(lengths)

    def logits(self, seqs: Sequence[Sequence[int]]) -> torch.Tensor:
        ids, lengths = self._batch(seqs)
        return self.model(ids, lengths)

    def _tables(self):
        """Per-(width, offset) projections of every vocabulary row, in float64.

        Hard-input inference sums table rows elementwise, so a sequence gets
        bit-identical probabilities whatever batch it is evaluated in.
        """
        key = tuple((id(p), p._version) for p in self.model.parameters())
        if getattr(self, "_table_key", None) != key:
            with torch.no_grad():
                emb = self.model.embedding.weight.double()
                tables = []
                for conv in self.model.convs:
                    w = conv.weight.double()  # (maps, dim, width)
                    tables.append(([(emb @ w[:, :, k].T).numpy() for k in range(w.size(2))],
                                   conv.bias.double().numpy()))
                out_w = self.model.out.weight.double().numpy()
                out_b = self.model.out.bias.double().numpy()
            self._table_cache = (tables, out_w, out_b)
            self._table_key = key
        return self._table_cache

    def predict_proba_batch(self, seqs: Sequence[Sequence[int]]) -> np.ndarray:
        ids, lengths = self._batch(seqs)
        ids, lengths = ids.numpy(), lengths.numpy()
        tables, out_w, out_b = self._tables()
        pooled = []
        for (offsets, bias), w in zip(tables, self.model.widths):
            n_win = ids.shape[1] - w + 1
            h = np.broadcast_to(bias, (ids.shape[0], n_win, bias.shape[0])).copy()
            for k, table in enumerate(offsets):
                h += table[ids[:, k: k + n_win]]
            np.maximum(h, 0.0, out=h)
            valid = np.arange(n_win)[None, :] <= (lengths[:, None] - w)
            h[~valid] = -np.inf
            pooled.append(h.max(axis=1))
        feats = np.concatenate(pooled, axis=1)
        logits = (feats[:, None, :] * out_w[None, :, :]).sum(-1) + out_b
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict_proba(self, ids: Sequence[int]) -> np.ndarray:
        return self.predict_proba_batch([ids])[0]

    def proba_words(self, sentences: Sequence[Sequence[str]]) -> np.ndarray:
        """Style distribution for whitespace-word sentences (the deleter's interface)."""
        return self.predict_proba_batch([self.vocab.encode(ws) for ws in sentences])

    def predict_proba_soft(self, dists: torch.Tensor, lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Classify sequences of token distributions through soft embeddings.

        ``dists`` has shape (time, vocab) or (batch, time, vocab); each position's
        embedding is the probability-weighted mean of embedding rows. The result
        is differentiable in ``dists``; classifier weights are used as-is.
        """
        single = dists.dim() == 2
        if single:
            dists = dists[None]
        B, T, V = dists.shape
        if V != len(self.vocab):
            raise ConfigError(f"distribution width {V} != vocabulary size {len(self.vocab)}")
        if T == 0:
            raise InputError("cannot classify an empty sequence")
        if lengths is None:
            lengths = torch.full((B,), T, dtype=torch.long)
        mask = torch.arange(T)[None, :] < lengths[:, None]
        sums = dists.sum(-1)
        if bool(((sums - 1).abs() > 1e-4)[mask].any()):
            raise InputError("token distributions must sum to 1 (tolerance 1e-4)")
        weight = self.model.embedding.weight.to(dists.dtype)
        emb = (dists @ weight) * mask[..., None].to(dists.dtype)
        if T < self.model.min_len:
            emb = F.pad(emb, (0, 0, 0, self.model.min_len - T))
        eff = lengths.clamp(min=self.model.min_len)
        was_training = self.model.training
        self.model.eval()
        try:
            probs = F.softmax(self.model.forward_embedded(emb, eff), dim=-1)
        finally:
            self.model.train(was_training)
        return probs[0] if single else probs

    # -- persistence ------------------------------------------------------

    def state(self) -> dict:
        return {"kind": "classifier", "config": asdict(self.cfg), "n_styles": self.n_styles,
                "vocab_hash": self.vocab_hash, "state_dict": self.model.state_dict(),
                "history": self.history}

    def save(self, path, **extra) -> None:
        torch.save({**self.state(), **extra}, path)

    @classmethod
    def load(cls, path, vocab: Vocabulary) -> "StyleClassifier":
        blob = torch.load(path, map_location="cpu", weights_only=False)
        if blob.get("kind") != "classifier":
            raise ConfigError(f"{path} is not a classifier checkpoint")
        if blob["vocab_hash"] != vocab.digest():
            raise ConfigError(f"{path} was trained against a different vocabulary")
        clf = cls(vocab, ClassifierConfig(**blob["config"]), blob["n_styles"])
        clf.model.load_state_dict(blob["state_dict"])
        clf.model.eval()
        clf.history = blob.get("history", [])
        return clf


def _encode_split(vocab: Vocabulary, split: DatasetSplit):
    seqs, labels = [], []
    for s in split:
        seqs.append(vocab.encode(s.tokens))
        labels.append(vocab.styles.index(s.style))  # class index, not the raw style id
    return seqs, labels


def accuracy(clf: StyleClassifier, seqs, labels, batch_size: int = 256) -> float:
    if not seqs:
        return float("nan")
    correct = 0
    for i in range(0, len(seqs), batch_size):
        p = clf.predict_proba_batch(seqs[i: i + batch_size])
        correct += int((p.argmax(1) == np.asarray(labels[i: i + batch_size])).sum())
    return correct / len(seqs)


def train_classifier(train: DatasetSplit, dev: Optional[DatasetSplit], cfg: ClassifierConfig,
                     vocab: Vocabulary) -> StyleClassifier:
    """Train with Adam and keep the epoch with the best dev accuracy.

    Without a dev split the training accuracy selects the epoch instead.
    """
    if len(train.present_styles()) < 2:
        raise TrainingError("training a style classifier needs sentences from at least two styles")
    torch.manual_seed(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    clf = StyleClassifier(vocab, cfg, n_styles=len(vocab.styles))
    model = clf.model
    seqs, labels = _encode_split(vocab, train)
    dev_seqs, dev_labels = _encode_split(vocab, dev) if dev is not None and len(dev) else (seqs, labels)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    y_all = torch.as_tensor(labels)

    best_acc, best_state = -1.0, None
    for epoch in range(cfg.epochs):
        model.train()
        order = torch.randperm(len(seqs), generator=gen).tolist()
        total = 0.0
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i: i + cfg.batch_size]
            ids, lengths = clf._batch([seqs[j] for j in idx])
            loss = F.cross_entropy(model(ids, lengths), y_all[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        model.eval()
        dev_acc = accuracy(clf, dev_seqs, dev_labels)
        clf.history.append({"epoch": epoch + 1, "train_loss": total / len(seqs), "dev_accuracy": dev_acc})
        logger.info("classifier epoch %d loss %.4f dev acc %.4f", epoch + 1, total / len(seqs), dev_acc)
        if dev_acc > best_acc:
            best_acc, best_state = dev_acc, copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)
    model.zero_grad(set_to_none=True)
    model.eval()
    return clf
