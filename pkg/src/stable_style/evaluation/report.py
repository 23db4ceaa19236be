"""Per-system evaluation reports and their table/JSONL renderings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..errors import ConfigError, InputError
from .bleu import bleu_corpus
from .lm import perplexity
from .semantic import semantic_score

Words = Sequence[str]

PPL_CONVENTION = "perplexity = exp(total NLL / total tokens) over the corpus, end token included"


@dataclass
class EvalReport:
    system_name: str
    s_bleu: Optional[float] = None
    h_bleu: Optional[float] = None
    style_accuracy: Optional[float] = None
    d_ppl: Optional[float] = None
    g_ppl: Optional[float] = None
    semantic: Optional[float] = None
    flags: Set[str] = field(default_factory=set)

    @property
    def g_bleu(self) -> Optional[float]:
        if self.s_bleu is None or self.h_bleu is None:
            return None
        return math.sqrt(self.s_bleu * self.h_bleu)

    @property
    def t_ppl(self) -> Optional[float]:
        if self.d_ppl is None or self.g_ppl is None:
            return None
        return math.sqrt(self.d_ppl * self.g_ppl)

    @property
    def stable(self) -> bool:
        return not self.flags

    def to_record(self) -> dict:
        return {"system": self.system_name, "s_bleu": self.s_bleu, "h_bleu": self.h_bleu,
                "g_bleu": self.g_bleu, "style_accuracy": self.style_accuracy, "d_ppl": self.d_ppl,
                "g_ppl": self.g_ppl, "t_ppl": self.t_ppl, "semantic": self.semantic,
                "flags": sorted(self.flags)}

    @classmethod
    def from_record(cls, rec: dict) -> "EvalReport":
        return cls(rec["system"], rec.get("s_bleu"), rec.get("h_bleu"), rec.get("style_accuracy"),
                   rec.get("d_ppl"), rec.get("g_ppl"), rec.get("semantic"), set(rec.get("flags", [])))


def style_accuracy(eval_clf, outputs: Sequence[Tuple[Words, int]], vocab_hash: Optional[str] = None) -> float:
    """Share of outputs the evaluation classifier assigns to their target style.

    Empty outputs count as misses.
    """
    if not outputs:
        raise InputError("style accuracy of an empty output list is undefined")
    if vocab_hash is not None and getattr(eval_clf, "vocab_hash", vocab_hash) != vocab_hash:
        raise ConfigError("evaluation classifier uses a different vocabulary")
    idx = [i for i, (ws, _) in enumerate(outputs) if len(ws)]
    hits = 0
    if idx:
        probs = eval_clf.proba_words([list(outputs[i][0]) for i in idx])
        styles = getattr(eval_clf, "vocab", None)
        order = styles.styles if styles is not None else list(range(probs.shape[1]))
        for row, i in zip(probs, idx):
            hits += int(order[int(np.argmax(row))] == outputs[i][1])
    return hits / len(outputs)


def evaluate_system(name: str, sources: Sequence[Words], outputs: Sequence[Words], target_styles: Sequence[int],
                    references: Optional[Sequence[Sequence[Words]]] = None, eval_clf=None, d_lm=None,
                    g_lm=None, semantic_adapter=None) -> EvalReport:
    """Score one system; metrics whose model or data is missing stay ``None``."""
    if not (len(sources) == len(outputs) == len(target_styles)):
        raise InputError(f"{name}: {len(sources)} sources, {len(outputs)} outputs, {len(target_styles)} targets")
    rep = EvalReport(name)
    rep.s_bleu = bleu_corpus(outputs, [[s] for s in sources])
    if references is not None:
        if len(references) != len(outputs):
            raise InputError(f"{name}: {len(outputs)} outputs but {len(references)} reference lists")
        rep.h_bleu = bleu_corpus(outputs, references)
        if semantic_adapter is not None:
            rep.semantic = semantic_score(semantic_adapter, outputs, references)
    if eval_clf is not None:
        rep.style_accuracy = style_accuracy(eval_clf, list(zip(outputs, target_styles)))
    nonempty = [o for o in outputs if len(o)] or [["."]]
    if d_lm is not None:
        rep.d_ppl = perplexity(d_lm, nonempty)
    if g_lm is not None:
        rep.g_ppl = perplexity(g_lm, nonempty)
    return rep


COLUMNS = [("s-BLEU", "s_bleu"), ("h-BLEU", "h_bleu"), ("G-BLEU", "g_bleu"), ("Acc(%)", "style_accuracy"),
           ("d-PPL", "d_ppl"), ("g-PPL", "g_ppl"), ("t-PPL", "t_ppl"), ("Semantic", "semantic")]


def render_table(reports: Iterable[EvalReport]) -> str:
    """Plain-text table; flagged cells are marked with ``*``."""
    reports = list(reports)
    header = ["Model"] + [c for c, _ in COLUMNS]
    rows = []
    for r in reports:
        row = [r.system_name]
        for _, attr in COLUMNS:
            v = getattr(r, attr)
            if v is None:
                cell = "-"
            else:
                cell = f"{100 * v:.1f}" if attr == "style_accuracy" else f"{v:.2f}"
            if attr in r.flags:
                cell += "*"
            row.append(cell)
        rows.append(row)
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    fmt = " | ".join(f"{{:<{w}}}" if i == 0 else f"{{:>{w}}}" for i, w in enumerate(widths))
    lines = [f"# {PPL_CONVENTION}; * = below the 95% stability margin",
             fmt.format(*header), "-+-".join("-" * w for w in widths)]
    lines += [fmt.format(*row) for row in rows]
    return "\n".join(lines) + "\n"


def write_reports(reports: Iterable[EvalReport], path, **meta) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps({**r.to_record(), **meta}) + "\n")
