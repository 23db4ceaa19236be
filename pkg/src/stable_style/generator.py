"""Style-conditioned Transformer encoder-decoder.

The encoder reads the content words left by the deleter. The decoder input
starts with two fixed slots, the style embedding and the start token, neither
of which receives a position embedding; generated tokens follow with
positions counted from zero. Training mixes teacher-forced reconstruction in
the source style with a style loss: the model rolls out greedily in the
target style and a frozen classifier scores the soft embeddings of the
predicted distributions.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .classifier import StyleClassifier
from .corpus import DatasetSplit, StyledSentence
from .deleter import DeleterConfig, DeletionTrace, delete
from .errors import ConfigError, DivergenceError, InputError
from .tokenizer import Vocabulary

logger = logging.getLogger(__name__)

# decoder slots occupied by the style vector and the start token
N_PREFIX = 2


@dataclass
class GeneratorConfig:
    d_model: int = 256
    n_heads: int = 4
    n_layers: int = 3
    d_ff: int = 1024
    dropout: float = 0.1
    max_len: int = 128
    tie_output: bool = False


@dataclass
class TrainConfig:
    lambda_style: float = 1.0
    use_style_loss: bool = True
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-4
    clip_norm: float = 1.0
    seed: int = 0
    max_decode_len: Optional[int] = None
    alpha_train: float = 0.7
    beta_train: float = 0.5
    reduction: str = "mean"
    rollout: str = "greedy"
    checkpoint_dir: Optional[str] = None

    def __post_init__(self):
        if self.lambda_style < 0:
            raise ConfigError("lambda_style must be nonnegative")
        if self.reduction not in ("mean", "sum"):
            raise ConfigError(f"unknown reduction {self.reduction!r}")
        if self.rollout not in ("greedy", "soft"):
            raise ConfigError(f"unknown rollout {self.rollout!r}")


def default_decode_len(source_len: int) -> int:
    return math.ceil(1.5 * source_len) + 5


@dataclass
class TransferResult:
    source: StyledSentence
    content: List[str]
    target_style: int
    output: List[str]
    trace: Optional[DeletionTrace] = None
    decode_len: int = 0
    truncated: bool = False

    def to_record(self) -> dict:
        return {"source": self.source.text, "source_style": self.source.style,
                "content": " ".join(self.content), "target_style": self.target_style,
                "output": " ".join(self.output), "decode_len": self.decode_len,
                "truncated": self.truncated}


class StyleTransformer(nn.Module):
    def __init__(self, vocab_size: int, n_styles: int, cfg: GeneratorConfig):
        super().__init__()
        d = cfg.d_model
        self.cfg = cfg
        self.tok_emb = nn.Embedding(vocab_size, d, padding_idx=Vocabulary.pad_id)
        self.pos_emb = nn.Embedding(cfg.max_len, d)
        self.style_emb = nn.Embedding(n_styles, d)
        enc_layer = nn.TransformerEncoderLayer(d, cfg.n_heads, cfg.d_ff, cfg.dropout, batch_first=True)
        dec_layer = nn.TransformerDecoderLayer(d, cfg.n_heads, cfg.d_ff, cfg.dropout, batch_first=True)
        self.encoder = nn.TransformerEncoder(enc_layer, cfg.n_layers, enable_nested_tensor=False)
        self.decoder = nn.TransformerDecoder(dec_layer, cfg.n_layers)
        self.out = nn.Linear(d, vocab_size, bias=not cfg.tie_output)
        if cfg.tie_output:
            self.out.weight = self.tok_emb.weight

    def encode(self, src: torch.Tensor, src_pad: torch.Tensor) -> torch.Tensor:
        """Encoder states (batch, src_len, d) for padded content ids."""
        if src.size(1) > self.cfg.max_len:
            raise InputError(f"content of {src.size(1)} subwords exceeds max_len {self.cfg.max_len}")
        pos = torch.arange(src.size(1), device=src.device)
        x = self.tok_emb(src) + self.pos_emb(pos)[None]
        return self.encoder(x, src_key_padding_mask=src_pad)

    def decoder_inputs(self, style_vec: torch.Tensor, prev: Optional[torch.Tensor] = None,
                       prev_emb: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Stack [style, start, y_1 + pos_0, ...]; the first two slots carry no position."""
        B = style_vec.size(0)
        start = self.tok_emb.weight[Vocabulary.start_id].expand(B, 1, -1)
        parts = [style_vec[:, None, :], start]
        if prev_emb is None and prev is not None:
            prev_emb = self.tok_emb(prev)
        if prev_emb is not None and prev_emb.size(1):
            L = prev_emb.size(1)
            if L > self.cfg.max_len:
                raise InputError(f"decoder prefix of {L} exceeds max_len {self.cfg.max_len}")
            parts.append(prev_emb + self.pos_emb(torch.arange(L, device=prev_emb.device))[None])
        return torch.cat(parts, dim=1)

    def decode(self, inputs: torch.Tensor, memory: torch.Tensor, src_pad: torch.Tensor,
               tgt_pad: Optional[torch.Tensor] = None) -> torch.Tensor:
        T = inputs.size(1)
        causal = torch.ones((T, T), dtype=torch.bool, device=inputs.device).triu(1)
        h = self.decoder(inputs, memory, tgt_mask=causal, tgt_key_padding_mask=tgt_pad,
                         memory_key_padding_mask=src_pad)
        return self.out(h)


def _pad(seqs: Sequence[Sequence[int]]) -> Tuple[torch.Tensor, torch.Tensor]:
    T = max(len(s) for s in seqs)
    ids = torch.full((len(seqs), T), Vocabulary.pad_id, dtype=torch.long)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = torch.as_tensor(list(s), dtype=torch.long)
    return ids, ids == Vocabulary.pad_id


class StyleTransferModel:
    """Generator parameters bound to their vocabulary, plus the decoding API."""

    def __init__(self, vocab: Vocabulary, cfg: Optional[GeneratorConfig] = None,
                 module: Optional[StyleTransformer] = None):
        self.vocab = vocab
        self.cfg = cfg or GeneratorConfig()
        self.n_styles = len(vocab.styles)
        self.module = module or StyleTransformer(len(vocab), self.n_styles, self.cfg)
        self.module.eval()
        self.history: List[dict] = []
        self.meta: Dict[str, object] = {}

    @property
    def vocab_hash(self) -> str:
        return self.vocab.digest()

    def _check_style(self, style: int) -> None:
        if style not in self.vocab.styles:
            raise InputError(f"unknown style {style}; declared {self.vocab.styles}")

    def _encode_contents(self, contents: Sequence[Sequence[str]]):
        ids = [self.vocab.encode(c) for c in contents]
        if any(not s for s in ids):
            raise InputError("content must hold at least one word")
        src, src_pad = _pad(ids)
        return src, src_pad, ids

    def encode(self, content: Sequence[str]) -> torch.Tensor:
        """Encoder states (n_subwords, d) for one content word list."""
        src, src_pad, _ = self._encode_contents([content])
        with torch.no_grad():
            return self.module.encode(src, src_pad)[0]

    def style_vectors(self, styles: Sequence[int]) -> torch.Tensor:
        for s in styles:
            self._check_style(s)
        return self.module.style_emb(torch.as_tensor([self.vocab.styles.index(s) for s in styles]))

    # -- decoding ---------------------------------------------------------

    @torch.no_grad()
    def _greedy(self, contents, style_vec, max_lens: Sequence[int]):
        m = self.module
        m.eval()
        src, src_pad, _ = self._encode_contents(contents)
        memory = m.encode(src, src_pad)
        B = len(contents)
        # the position table bounds how far any decode can run
        max_lens = [min(n, m.cfg.max_len) for n in max_lens]
        cap = max(max_lens)
        out = torch.zeros((B, 0), dtype=torch.long)
        done = torch.zeros(B, dtype=torch.bool)
        for t in range(cap):
            logits = m.decode(m.decoder_inputs(style_vec, out), memory, src_pad)[:, -1]
            nxt = logits.argmax(-1)
            out = torch.cat([out, nxt[:, None]], dim=1)
            done |= nxt == Vocabulary.end_id
            done |= torch.as_tensor([t + 1 >= n for n in max_lens])
            if bool(done.all()):
                break
        results = []
        for b in range(B):
            ids = out[b].tolist()[: max_lens[b]]
            if Vocabulary.end_id in ids:
                results.append((ids[: ids.index(Vocabulary.end_id)], False))
            else:
                results.append((ids, True))
        return results

    def generate_batch(self, contents: Sequence[Sequence[str]], styles: Sequence[int],
                       max_lens: Optional[Sequence[int]] = None) -> List[Tuple[List[str], int, bool]]:
        """Greedy decodes as ``(words, n_subwords, truncated)`` tuples."""
        if max_lens is None:
            max_lens = [default_decode_len(len(self.vocab.encode(c))) for c in contents]
        style_vec = self.style_vectors(styles)
        res = self._greedy(contents, style_vec, list(max_lens))
        return [(self.vocab.decode(ids), len(ids), tr) for ids, tr in res]

    def generate(self, content: Sequence[str], style: int, max_decode_len: Optional[int] = None) -> List[str]:
        lens = None if max_decode_len is None else [max_decode_len]
        return self.generate_batch([content], [style], lens)[0][0]

    def latent_walk(self, content: Sequence[str], source_style: int, w_grid: Sequence[float],
                    max_decode_len: Optional[int] = None) -> List[Tuple[float, List[str]]]:
        """Decode with style vectors ``w * E[target] + (1 - w) * E[source]``."""
        if len(self.vocab.styles) != 2:
            raise InputError("latent walks interpolate between exactly two styles")
        if any(not 0 <= w <= 1 for w in w_grid):
            raise InputError("interpolation weights must lie in [0, 1]")
        target = [s for s in self.vocab.styles if s != source_style][0]
        src_vec, tgt_vec = self.style_vectors([source_style, target]).detach()
        cap = [max_decode_len or default_decode_len(len(self.vocab.encode(content)))]
        out = []
        for w in w_grid:
            vec = (w * tgt_vec + (1 - w) * src_vec)[None]
            ids, _ = self._greedy([content], vec, cap)[0]
            out.append((w, self.vocab.decode(ids)))
        return out

    def transfer(self, clf: StyleClassifier, sentences: Sequence[StyledSentence], cfg: DeleterConfig,
                 target_styles: Optional[Sequence[int]] = None, batch_size: int = 64) -> List[TransferResult]:
        if clf.vocab_hash != self.vocab_hash:
            raise ConfigError("classifier and generator use different vocabularies")
        if target_styles is None:
            target_styles = [opposite_style(s.style, self.vocab.styles) for s in sentences]
        traces = [delete(clf, s, cfg) for s in sentences]
        results = []
        for i in range(0, len(sentences), batch_size):
            chunk = list(range(i, min(i + batch_size, len(sentences))))
            lens = [default_decode_len(len(self.vocab.encode(sentences[j].tokens))) for j in chunk]
            outs = self.generate_batch([traces[j].content for j in chunk], [target_styles[j] for j in chunk], lens)
            for j, (words, n, tr) in zip(chunk, outs):
                results.append(TransferResult(sentences[j], traces[j].content, target_styles[j], words,
                                              traces[j], n, tr))
        return results

    # -- losses -----------------------------------------------------------

    def reconstruction_loss_batch(self, contents_ids, styles: Sequence[int], targets_ids,
                                  reduction: str = "mean") -> torch.Tensor:
        """Teacher-forced NLL of ``targets + end`` given content and source style."""
        m = self.module
        src, src_pad = _pad(contents_ids)
        memory = m.encode(src, src_pad)
        prev, prev_pad = _pad([list(t) if t else [Vocabulary.pad_id] for t in targets_ids])
        for b, t in enumerate(targets_ids):
            if not t:
                prev_pad[b, :] = True
        gold = torch.full((len(targets_ids), prev.size(1) + 1), -100, dtype=torch.long)
        for b, t in enumerate(targets_ids):
            gold[b, : len(t)] = torch.as_tensor(list(t), dtype=torch.long)
            gold[b, len(t)] = Vocabulary.end_id
        inputs = m.decoder_inputs(self.style_vectors(styles), prev)
        tgt_pad = torch.cat([torch.zeros(len(targets_ids), N_PREFIX, dtype=torch.bool), prev_pad], dim=1)
        logits = m.decode(inputs, memory, src_pad, tgt_pad)[:, 1:]
        nll = F.cross_entropy(logits.reshape(-1, logits.size(-1)), gold.reshape(-1),
                              ignore_index=-100, reduction="sum")
        if reduction == "sum":
            return nll
        return nll / (gold != -100).sum()

    def reconstruction_loss(self, content: Sequence[str], source_style: int, original: Sequence[str],
                            reduction: str = "mean") -> torch.Tensor:
        return self.reconstruction_loss_batch([self.vocab.encode(content)], [source_style],
                                              [self.vocab.encode(original)], reduction)

    def rollout_distributions(self, contents_ids, styles: Sequence[int], max_lens: Sequence[int],
                              rollout: str = "greedy") -> Tuple[torch.Tensor, torch.Tensor]:
        """Per-step next-token distributions of a rollout in ``styles``.

        Returns ``(dists, lengths)`` with dists of shape (batch, steps, vocab);
        ``lengths`` counts the positions before the first predicted end token
        (at least one). In greedy mode the fed tokens are argmax choices made
        without gradient, then one teacher-forced pass over them produces the
        differentiable distributions.
        """
        m = self.module
        src, src_pad = _pad(contents_ids)
        style_vec = self.style_vectors(styles)
        max_lens = [min(n, m.cfg.max_len) for n in max_lens]
        B, cap = len(contents_ids), max(max_lens)
        if rollout == "greedy":
            with torch.no_grad():
                mem0 = m.encode(src, src_pad)
                fed = torch.zeros((B, 0), dtype=torch.long)
                for _ in range(cap):
                    nxt = m.decode(m.decoder_inputs(style_vec.detach(), fed), mem0, src_pad)[:, -1].argmax(-1)
                    fed = torch.cat([fed, nxt[:, None]], dim=1)
                    if bool((fed == Vocabulary.end_id).any(1).all()):
                        break
            memory = m.encode(src, src_pad)
            logits = m.decode(m.decoder_inputs(style_vec, fed[:, :-1]), memory, src_pad)[:, 1:]
            dists = F.softmax(logits, dim=-1)
            choices = fed
        else:
            memory = m.encode(src, src_pad)
            prev_emb = torch.zeros((B, 0, m.cfg.d_model), dtype=memory.dtype)
            steps = []
            for _ in range(cap):
                logits = m.decode(m.decoder_inputs(style_vec, prev_emb=prev_emb), memory, src_pad)[:, -1]
                p = F.softmax(logits, dim=-1)
                steps.append(p)
                prev_emb = torch.cat([prev_emb, (p @ m.tok_emb.weight)[:, None]], dim=1)
            dists = torch.stack(steps, dim=1)
            choices = dists.argmax(-1)
        lengths = []
        for b in range(B):
            row = choices[b, : max_lens[b]].tolist()
            n = row.index(Vocabulary.end_id) if Vocabulary.end_id in row else len(row)
            lengths.append(max(n, 1))
        return dists, torch.as_tensor(lengths)

    def style_loss_batch(self, clf: StyleClassifier, contents_ids, target_styles: Sequence[int],
                         max_lens: Sequence[int], rollout: str = "greedy") -> torch.Tensor:
        if clf.vocab_hash != self.vocab_hash:
            raise ConfigError("classifier and generator use different vocabularies")
        dists, lengths = self.rollout_distributions(contents_ids, target_styles, max_lens, rollout)
        T = int(lengths.max())
        probs = clf.predict_proba_soft(dists[:, :T], lengths)
        idx = torch.as_tensor([clf.vocab.styles.index(s) for s in target_styles])
        return -torch.log(probs.gather(1, idx[:, None]).squeeze(1).clamp_min(1e-12)).mean()

    def style_loss(self, clf: StyleClassifier, content: Sequence[str], target_style: int,
                   max_decode_len: Optional[int] = None, rollout: str = "greedy") -> torch.Tensor:
        ids = self.vocab.encode(content)
        cap = max_decode_len or default_decode_len(len(ids))
        return self.style_loss_batch(clf, [ids], [target_style], [cap], rollout)

    # -- persistence ------------------------------------------------------

    def save(self, path, **extra) -> None:
        torch.save({"kind": "generator", "config": asdict(self.cfg), "vocab_hash": self.vocab_hash,
                    "state_dict": self.module.state_dict(), "history": self.history,
                    "meta": self.meta, **extra}, path)

    @classmethod
    def load(cls, path, vocab: Vocabulary) -> "StyleTransferModel":
        blob = torch.load(path, map_location="cpu", weights_only=False)
        if blob.get("kind") != "generator":
            raise ConfigError(f"{path} is not a generator checkpoint")
        if blob["vocab_hash"] != vocab.digest():
            raise ConfigError(f"{path} was trained against a different vocabulary")
        model = cls(vocab, GeneratorConfig(**blob["config"]))
        model.module.load_state_dict(blob["state_dict"])
        model.module.eval()
        model.history = blob.get("history", [])
        model.meta = blob.get("meta", {})
        return model


def opposite_style(style: int, styles: Sequence[int], rng: Optional[random.Random] = None) -> int:
    others = [s for s in styles if s != style]
    if len(others) == 1:
        return others[0]
    return (rng or random.Random(style)).choice(others)


def state_hash(module: nn.Module) -> str:
    h = hashlib.sha256()
    for k, v in module.state_dict().items():
        h.update(k.encode())
        h.update(v.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def fit(train: DatasetSplit, clf: StyleClassifier, cfg: TrainConfig,
        gen_cfg: Optional[GeneratorConfig] = None, vocab: Optional[Vocabulary] = None,
        traces: Optional[List[DeletionTrace]] = None) -> StyleTransferModel:
    """Train the generator on the deleter's content tokens.

    Per batch the loss is the reconstruction loss in the source style plus
    ``lambda_style`` times the style loss towards the other style. The
    classifier stays frozen throughout.
    """
    vocab = vocab or clf.vocab
    if clf.vocab_hash != vocab.digest():
        raise ConfigError("classifier and generator use different vocabularies")
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    model = StyleTransferModel(vocab, gen_cfg)
    model.meta.update({"train_config": asdict(cfg), "classifier_hash": state_hash(clf.model), "seed": cfg.seed})
    for p in clf.model.parameters():
        p.requires_grad_(False)
    clf.model.eval()

    sentences = list(train)
    if traces is None:
        del_cfg = DeleterConfig(cfg.alpha_train, cfg.beta_train)
        traces = [delete(clf, s, del_cfg) for s in sentences]
        logger.info("deleted attribute markers for %d training sentences", len(traces))
    content_ids = [vocab.encode(t.content) for t in traces]
    target_ids = [vocab.encode(s.tokens) for s in sentences]
    styles = [s.style for s in sentences]
    caps = [cfg.max_decode_len or default_decode_len(len(t)) for t in target_ids]
    use_style = cfg.use_style_loss and cfg.lambda_style > 0

    m = model.module
    opt = torch.optim.Adam(m.parameters(), lr=cfg.learning_rate)
    for epoch in range(cfg.epochs):
        m.train()
        order = torch.randperm(len(sentences), generator=gen).tolist()
        tot_rec = tot_style = 0.0
        n_batches = 0
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i: i + cfg.batch_size]
            rec = model.reconstruction_loss_batch([content_ids[j] for j in idx], [styles[j] for j in idx],
                                                  [target_ids[j] for j in idx], cfg.reduction)
            loss = rec
            style_val = 0.0
            if use_style:
                tgt = [opposite_style(styles[j], vocab.styles, rng) for j in idx]
                sl = model.style_loss_batch(clf, [content_ids[j] for j in idx], tgt,
                                            [caps[j] for j in idx], cfg.rollout)
                loss = rec + cfg.lambda_style * sl
                style_val = sl.item()
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch + 1}, batch {n_batches + 1}: "
                                      f"reconstruction={rec.item()} style={style_val}")
            opt.zero_grad()
            loss.backward()
            if cfg.clip_norm:
                torch.nn.utils.clip_grad_norm_(m.parameters(), cfg.clip_norm)
            opt.step()
            tot_rec += rec.item()
            tot_style += style_val
            n_batches += 1
        m.eval()
        entry = {"epoch": epoch + 1, "reconstruction": tot_rec / n_batches, "style": tot_style / n_batches}
        model.history.append(entry)
        logger.info("generator epoch %d rec %.4f style %.4f", epoch + 1, entry["reconstruction"], entry["style"])
        if cfg.checkpoint_dir:
            Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)
            model.save(Path(cfg.checkpoint_dir) / f"generator.epoch{epoch + 1}.pt")
    m.zero_grad(set_to_none=True)
    return model
