"""Delete-and-generate text style transfer with an automatic evaluation suite."""

from .classifier import ClassifierConfig, StyleClassifier, train_classifier
from .corpus import DatasetSplit, ReferenceSet, StyledSentence, load_dataset, load_references, subsample
from .deleter import DeleterConfig, DeletionTrace, delete, importance_scores
from .generator import GeneratorConfig, StyleTransferModel, TrainConfig, TransferResult, fit
from .tokenizer import Vocabulary, train_bpe

__version__ = "0.1.0"

__all__ = [
    "ClassifierConfig", "StyleClassifier", "train_classifier",
    "DatasetSplit", "ReferenceSet", "StyledSentence", "load_dataset", "load_references", "subsample",
    "DeleterConfig", "DeletionTrace", "delete", "importance_scores",
    "GeneratorConfig", "StyleTransferModel", "TrainConfig", "TransferResult", "fit",
    "Vocabulary", "train_bpe",
]
