"""Experiment steps behind the command-line interface.

Each step reads and writes artifacts under ``cfg.output_dir``; checkpoints
and sidecar ``.meta.json`` files record the config hash and seed.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .classifier import StyleClassifier, train_classifier
from .config import ExperimentConfig
from .corpus import AlignmentError, DatasetSplit, ReferenceSet, load_dataset, load_references, subsample
from .deleter import DeleterConfig, write_traces
from .errors import ConfigError
from .evaluation.bleu import bleu_corpus
from .evaluation.lm import FileScoredLM, TransformerLM, train_lm
from .evaluation.report import EvalReport, evaluate_system, render_table, style_accuracy, write_reports
from .evaluation.semantic import EncoderStatesAdapter
from .evaluation.stability import stability_report
from .generator import StyleTransferModel, fit
from .tokenizer import Vocabulary, train_bpe

logger = logging.getLogger(__name__)


def _meta(cfg: ExperimentConfig, **extra) -> dict:
    return {"config_hash": cfg.digest(), "seed": cfg.seed, **extra}


def _write_meta(path: Path, cfg: ExperimentConfig, **extra) -> None:
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(_meta(cfg, **extra), fh, indent=2, sort_keys=True)


def load_data(cfg: ExperimentConfig) -> Dict[str, DatasetSplit]:
    splits = load_dataset(cfg.data.root, cfg.data.styles, cfg.data.domain)
    if cfg.data.train_per_style:
        splits["train"] = subsample(splits["train"], cfg.data.train_per_style, cfg.seed)
    return splits


def load_refs(cfg: ExperimentConfig, test: DatasetSplit) -> Optional[ReferenceSet]:
    if not cfg.data.references:
        return None
    return load_references(cfg.data.references, cfg.data.n_refs, test)


def vocab_dir(cfg: ExperimentConfig) -> Path:
    return cfg.out / "vocab"


def get_vocab(cfg: ExperimentConfig, train: Optional[DatasetSplit] = None) -> Vocabulary:
    d = vocab_dir(cfg)
    if (d / "merges.txt").exists():
        return Vocabulary.load(d)
    if train is None:
        raise ConfigError(f"no vocabulary under {d}; run train-classifier first")
    vocab = train_bpe(train, cfg.vocab_size, cfg.data.styles)
    vocab.save(d)
    _write_meta(d / "vocab.tsv", cfg, vocab_hash=vocab.digest())
    return vocab


def run_train_classifier(cfg: ExperimentConfig, role: str = "both") -> List[Path]:
    splits = load_data(cfg)
    vocab = get_vocab(cfg, splits["train"])
    dev = splits["dev"] if cfg.data.use_dev else None
    cfg.out.mkdir(parents=True, exist_ok=True)
    written = []
    jobs = {"style": (cfg.classifier, "classifier.pt"), "eval": (cfg.eval_classifier, "eval_classifier.pt")}
    for name in (["style", "eval"] if role == "both" else [role]):
        ccfg, fname = jobs[name]
        clf = train_classifier(splits["train"], dev, ccfg, vocab)
        path = cfg.out / fname
        clf.save(path, **_meta(cfg, role=name))
        written.append(path)
    return written


def load_classifier(cfg: ExperimentConfig, vocab: Vocabulary, name: str = "classifier.pt") -> StyleClassifier:
    path = cfg.out / name
    if not path.exists():
        raise ConfigError(f"missing checkpoint {path}")
    return StyleClassifier.load(path, vocab)


def run_train_generator(cfg: ExperimentConfig) -> Path:
    splits = load_data(cfg)
    vocab = get_vocab(cfg)
    clf = load_classifier(cfg, vocab)
    tcfg = cfg.train
    if tcfg.checkpoint_dir is None:
        tcfg = dataclasses.replace(tcfg, checkpoint_dir=str(cfg.out / "checkpoints"))
    model = fit(splits["train"], clf, tcfg, cfg.generator, vocab)
    model.meta.update(_meta(cfg))
    path = cfg.out / "generator.pt"
    model.save(path, **_meta(cfg))
    return path


def load_generator(cfg: ExperimentConfig, vocab: Vocabulary, path: Optional[str] = None) -> StyleTransferModel:
    p = Path(path) if path else cfg.out / "generator.pt"
    if not p.exists():
        raise ConfigError(f"missing checkpoint {p}")
    return StyleTransferModel.load(p, vocab)


def run_train_lm(cfg: ExperimentConfig, kind: str = "data") -> Path:
    vocab = get_vocab(cfg)
    splits = load_data(cfg)
    if kind == "data":
        corpus = list(splits["train"])
        lcfg, name = cfg.lm, "lm_data.pt"
    else:
        corpus = [list(s.tokens) for s in splits["train"]]
        for path in cfg.general_corpora:
            with open(path, encoding="utf-8") as fh:
                corpus.extend(line.split() for line in fh if line.strip())
        lcfg, name = cfg.general_lm, "lm_general.pt"
    lm = train_lm(corpus, vocab, lcfg)
    path = cfg.out / name
    lm.save(path, **_meta(cfg, corpus=kind))
    return path


def parse_direction(direction: Optional[str], styles: Sequence[int]) -> List[Tuple[int, int]]:
    """``"0-1"`` -> [(0, 1)]; ``None`` or ``"both"`` -> every ordered pair."""
    if direction in (None, "both", "all"):
        return [(s, t) for s in styles for t in styles if s != t]
    try:
        s, t = (int(x) for x in direction.split("-"))
    except ValueError:
        raise ConfigError(f"direction must look like '0-1', got {direction!r}") from None
    if s not in styles or t not in styles or s == t:
        raise ConfigError(f"invalid direction {direction!r} for styles {list(styles)}")
    return [(s, t)]


def transfer_path(cfg: ExperimentConfig, alpha: float, beta: float, src: int, tgt: int) -> Path:
    return cfg.out / "transfer" / f"sst_a{alpha:g}_b{beta:g}.{src}-{tgt}.txt"


def run_transfer(cfg: ExperimentConfig, alpha: Optional[float] = None, beta: Optional[float] = None,
                 direction: Optional[str] = None, checkpoint: Optional[str] = None,
                 model: Optional[StyleTransferModel] = None, clf: Optional[StyleClassifier] = None,
                 test: Optional[DatasetSplit] = None) -> List[Path]:
    """Transfer the test split; writes outputs, traces and full records per direction."""
    dcfg = cfg.deleter(alpha, beta)
    vocab = get_vocab(cfg)
    test = test or load_data(cfg)["test"]
    clf = clf or load_classifier(cfg, vocab)
    model = model or load_generator(cfg, vocab, checkpoint)
    if clf.vocab_hash != model.vocab_hash:
        raise ConfigError("classifier and generator checkpoints use different vocabularies")
    written = []
    for src, tgt in parse_direction(direction, cfg.data.styles):
        sents = test.sentences_by_style[src]
        results = model.transfer(clf, sents, dcfg, [tgt] * len(sents), cfg.transfer.batch_size)
        path = transfer_path(cfg, dcfg.alpha, dcfg.beta, src, tgt)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for r in results:
                fh.write(" ".join(r.output) + "\n")
        write_traces([r.trace for r in results], str(path) + ".trace.jsonl")
        with open(str(path) + ".records.jsonl", "w", encoding="utf-8") as fh:
            for r in results:
                fh.write(json.dumps(r.to_record(), ensure_ascii=False) + "\n")
        _write_meta(path, cfg, alpha=dcfg.alpha, beta=dcfg.beta, source_style=src, target_style=tgt)
        written.append(path)
    return written


def read_outputs(path) -> List[List[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh.read().split("\n")[:-1]] if Path(path).stat().st_size else []


class EvalResources:
    """Models shared by every system in one evaluation run."""

    def __init__(self, cfg: ExperimentConfig, test: DatasetSplit, refs: Optional[ReferenceSet],
                 eval_clf=None, d_lm=None, g_lm=None, adapter=None):
        self.cfg, self.test, self.refs = cfg, test, refs
        self.eval_clf, self.d_lm, self.g_lm, self.adapter = eval_clf, d_lm, g_lm, adapter

    @classmethod
    def from_run(cls, cfg: ExperimentConfig, test: Optional[DatasetSplit] = None) -> "EvalResources":
        vocab = get_vocab(cfg)
        test = test or load_data(cfg)["test"]
        refs = load_refs(cfg, test)
        out = cfg.out
        eval_clf = StyleClassifier.load(out / "eval_classifier.pt", vocab) if (out / "eval_classifier.pt").exists() else None
        d_lm = TransformerLM.load(out / "lm_data.pt", vocab) if (out / "lm_data.pt").exists() else None
        if cfg.g_ppl_scores:
            g_lm = FileScoredLM(cfg.g_ppl_scores)
        else:
            g_lm = TransformerLM.load(out / "lm_general.pt", vocab) if (out / "lm_general.pt").exists() else None
        adapter = None
        if (out / "generator.pt").exists():
            adapter = EncoderStatesAdapter(StyleTransferModel.load(out / "generator.pt", vocab))
        return cls(cfg, test, refs, eval_clf, d_lm, g_lm, adapter)

    def score(self, name: str, outputs_by_style: Dict[int, List[List[str]]]) -> EvalReport:
        sources, outputs, targets, references = [], [], [], []
        for src in self.cfg.data.styles:
            if src not in outputs_by_style:
                continue
            outs = outputs_by_style[src]
            test_sents = self.test.sentences_by_style[src]
            if len(outs) != len(test_sents):
                raise AlignmentError(f"system {name!r}, source style {src}", len(test_sents), len(outs))
            tgt = [t for t in self.cfg.data.styles if t != src][0]
            sources += [list(s.tokens) for s in test_sents]
            outputs += outs
            targets += [tgt] * len(outs)
            if self.refs is not None:
                references += self.refs.for_style(src)
        return evaluate_system(name, sources, outputs, targets, references if self.refs else None,
                               self.eval_clf, self.d_lm, self.g_lm, self.adapter)


def system_files(prefix: str, styles: Sequence[int]) -> Dict[int, Path]:
    """Outputs of one system: ``<prefix>.<source_style>`` or ``<prefix>.<src>-<tgt>.txt``."""
    found = {}
    for s in styles:
        for cand in (Path(f"{prefix}.{s}"), *Path(prefix).parent.glob(f"{Path(prefix).name}.{s}-*.txt")):
            if cand.exists():
                found[s] = cand
                break
    if not found:
        raise ConfigError(f"no output files found for prefix {prefix}")
    return found


def run_eval(cfg: ExperimentConfig, systems: Dict[str, str], input_copy: bool = False,
             resources: Optional[EvalResources] = None, out_name: str = "eval") -> List[EvalReport]:
    res = resources or EvalResources.from_run(cfg)
    reports = []
    if input_copy:
        reports.append(res.score("input copy", {s: [list(x.tokens) for x in res.test.sentences_by_style[s]]
                                                for s in cfg.data.styles}))
    for name, prefix in systems.items():
        files = system_files(prefix, cfg.data.styles)
        reports.append(res.score(name, {s: read_outputs(p) for s, p in files.items()}))
    stability_report(reports)
    out = cfg.out / out_name
    out.mkdir(parents=True, exist_ok=True)
    write_reports(reports, out / "report.jsonl", **_meta(cfg))
    (out / "table.txt").write_text(render_table(reports), encoding="utf-8")
    return reports


def run_sweep(cfg: ExperimentConfig, alpha_grid: Optional[Sequence[float]] = None,
              beta_grid: Optional[Sequence[float]] = None, checkpoint: Optional[str] = None,
              resources: Optional[EvalResources] = None, plot: bool = True) -> List[dict]:
    """Transfer + evaluate at every grid point: an alpha sweep at the fixed beta, then a beta sweep."""
    alpha_grid = list(cfg.sweep.alpha_grid if alpha_grid is None else alpha_grid)
    beta_grid = list(cfg.sweep.beta_grid if beta_grid is None else beta_grid)
    if not alpha_grid or not beta_grid:
        raise ConfigError("sweep grids must be non-empty")
    vocab = get_vocab(cfg)
    res = resources or EvalResources.from_run(cfg)
    clf = load_classifier(cfg, vocab)
    model = load_generator(cfg, vocab, checkpoint)
    points = [("alpha", a, cfg.sweep.fixed_beta) for a in alpha_grid]
    points += [("beta", cfg.sweep.fixed_alpha, b) for b in beta_grid]
    rows = []
    for axis, a, b in points:
        paths = run_transfer(cfg, a, b, None, model=model, clf=clf, test=res.test)
        outputs, deleted, n = {}, 0, 0
        for p in paths:
            src = int(p.name.split(".")[-2].split("-")[0])
            outputs[src] = read_outputs(p)
            with open(str(p) + ".records.jsonl", encoding="utf-8") as fh:
                for line in fh:
                    rec = json.loads(line)
                    deleted += len(rec["source"].split()) - len(rec["content"].split())
                    n += 1
        rep = res.score(f"sst({a:g},{b:g})", outputs)
        rows.append({"axis": axis, "alpha": a, "beta": b, "g_bleu": rep.g_bleu, "s_bleu": rep.s_bleu,
                     "style_accuracy": rep.style_accuracy, "mean_deleted": deleted / max(n, 1)})
    out = cfg.out / "sweep"
    out.mkdir(parents=True, exist_ok=True)
    cols = ["axis", "alpha", "beta", "g_bleu", "s_bleu", "style_accuracy", "mean_deleted"]
    with open(out / "sweep.tsv", "w", encoding="utf-8") as fh:
        fh.write("\t".join(cols) + "\n")
        for r in rows:
            fh.write("\t".join("" if r[c] is None else str(r[c]) for c in cols) + "\n")
    _write_meta(out / "sweep.tsv", cfg)
    if plot:
        plot_sweep(rows, out / "sweep.png")
    return rows


def plot_sweep(rows: List[dict], path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, axis in zip(axes, ("alpha", "beta")):
        pts = [r for r in rows if r["axis"] == axis]
        xs = [r["style_accuracy"] * 100 if r["style_accuracy"] is not None else np.nan for r in pts]
        ys = [r["g_bleu"] if r["g_bleu"] is not None else r["s_bleu"] for r in pts]
        ax.plot(xs, ys, marker="o")
        for r, x, y in zip(pts, xs, ys):
            ax.annotate(f"{r[axis]:g}", (x, y), textcoords="offset points", xytext=(4, 4), fontsize=8)
        ax.set_xlabel("style accuracy (%)")
        ax.set_ylabel("G-BLEU")
        ax.set_title(f"trade-off over {axis}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def run_walk(cfg: ExperimentConfig, texts: Optional[List[Tuple[str, int]]] = None,
             checkpoint: Optional[str] = None, alpha: Optional[float] = None,
             beta: Optional[float] = None) -> Path:
    """Latent walk for given ``(sentence, source style)`` pairs or the first test sentences."""
    from .corpus import StyledSentence
    from .deleter import delete

    vocab = get_vocab(cfg)
    clf = load_classifier(cfg, vocab)
    model = load_generator(cfg, vocab, checkpoint)
    if texts is None:
        test = load_data(cfg)["test"]
        texts = [(s.text, s.style) for s in list(test)[: cfg.walk.n_sentences]]
    path = cfg.out / "walk.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    dcfg = cfg.deleter(alpha, beta)
    with open(path, "w", encoding="utf-8") as fh:
        for text, style in texts:
            trace = delete(clf, StyledSentence.from_text(text, style), dcfg)
            walk = model.latent_walk(trace.content, style, cfg.walk.w_grid)
            fh.write(json.dumps({"source": text, "source_style": style, "content": " ".join(trace.content),
                                 "walk": [{"w": w, "output": " ".join(o)} for w, o in walk]}) + "\n")
    _write_meta(path, cfg)
    return path
