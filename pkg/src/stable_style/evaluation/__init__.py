from .bleu import bleu_corpus, geometric_mean, self_bleu
from .lm import FileScoredLM, LMConfig, TransformerLM, UniformLM, perplexity, train_lm
from .report import EvalReport, evaluate_system, render_table, style_accuracy
from .semantic import EncoderStatesAdapter, RandomVectorAdapter, greedy_f1, semantic_score
from .stability import stability_report

__all__ = [
    "bleu_corpus", "geometric_mean", "self_bleu",
    "FileScoredLM", "LMConfig", "TransformerLM", "UniformLM", "perplexity", "train_lm",
    "EvalReport", "evaluate_system", "render_table", "style_accuracy",
    "EncoderStatesAdapter", "RandomVectorAdapter", "greedy_f1", "semantic_score",
    "stability_report",
]
