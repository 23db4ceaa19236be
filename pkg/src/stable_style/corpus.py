"""Non-parallel style-labelled corpora in the released split layout.

Split files are named ``<domain>.<split>.<style_index>`` (one pre-tokenized
sentence per line) and human references ``reference.<source>.<style_index>``,
line-aligned with the matching test file.
"""

from __future__ import annotations

import logging
import os
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Sequence, Tuple

logger = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")


class CorpusError(Exception):
    """Base class for corpus loading problems."""


class CorpusLoadError(CorpusError):
    pass


class CorpusFormatError(CorpusError):
    def __init__(self, path, lineno: int, msg: str = "blank line"):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = str(path)
        self.lineno = lineno


class AlignmentError(CorpusError):
    def __init__(self, what: str, expected: int, got: int):
        super().__init__(f"{what}: expected {expected} lines, got {got}")
        self.expected = expected
        self.got = got


class SubsampleSizeError(CorpusError):
    pass


@dataclass(frozen=True)
class StyledSentence:
    tokens: Tuple[str, ...]
    style: int

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("a sentence needs at least one token")
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @classmethod
    def from_text(cls, text: str, style: int) -> "StyledSentence":
        return cls(tuple(text.split()), style)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __len__(self):
        return len(self.tokens)


@dataclass
class DatasetSplit:
    name: str
    sentences_by_style: Dict[int, List[StyledSentence]] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SPLITS:
            raise ValueError(f"unknown split {self.name!r}")
        for style, sents in self.sentences_by_style.items():
            for s in sents:
                if s.style != style:
                    raise ValueError(f"sentence with style {s.style} filed under style {style}")

    @property
    def styles(self) -> List[int]:
        return sorted(self.sentences_by_style)

    def counts(self) -> Dict[int, int]:
        return {s: len(v) for s, v in sorted(self.sentences_by_style.items())}

    def __len__(self):
        return sum(len(v) for v in self.sentences_by_style.values())

    def __iter__(self) -> Iterator[StyledSentence]:
        for style in self.styles:
            yield from self.sentences_by_style[style]

    def present_styles(self) -> List[int]:
        return [s for s in self.styles if self.sentences_by_style[s]]


@dataclass
class ReferenceSet:
    """Human references keyed by ``(test index, source style)``."""

    references: Dict[Tuple[int, int], List[Tuple[str, ...]]]
    sources: List[str] = field(default_factory=list)

    def __post_init__(self):
        sizes = {len(v) for v in self.references.values()}
        if 0 in sizes:
            raise ValueError("every test item needs at least one reference")
        if len(sizes) > 1:
            raise ValueError(f"non-uniform reference counts: {sorted(sizes)}")

    @property
    def n_refs(self) -> int:
        return len(next(iter(self.references.values()))) if self.references else 0

    def for_style(self, style: int) -> List[List[Tuple[str, ...]]]:
        keys = sorted(k for k in self.references if k[1] == style)
        return [self.references[k] for k in keys]


def _read_lines(path: Path) -> List[str]:
    if not path.is_file():
        raise CorpusLoadError(f"missing corpus file: {path}")
    lines = []
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw[:-1] if raw.endswith("\n") else raw
            if not line.strip():
                raise CorpusFormatError(path, lineno)
            lines.append(line)
    return lines


def split_path(root, domain: str, split: str, style: int) -> Path:
    return Path(root) / f"{domain}.{split}.{style}"


def load_split(root, domain: str, split: str, declared_styles: Sequence[int]) -> DatasetSplit:
    by_style = {}
    for style in declared_styles:
        path = split_path(root, domain, split, style)
        by_style[style] = [StyledSentence.from_text(line, style) for line in _read_lines(path)]
    return DatasetSplit(split, by_style)


def load_dataset(root, declared_styles: Sequence[int], domain: str = "sentiment") -> Dict[str, DatasetSplit]:
    """Load train/dev/test for every declared style.

    Line order is preserved; an empty file yields an empty list for that
    style. Blank lines raise :class:`CorpusFormatError` with the line number.
    """
    if len(set(declared_styles)) < 2:
        raise CorpusError("at least two declared styles are required")
    out = {split: load_split(root, domain, split, declared_styles) for split in SPLITS}
    for split, ds in out.items():
        logger.info("loaded %s/%s: %s", domain, split, ds.counts())
    return out


def write_split(split: DatasetSplit, root, domain: str = "sentiment") -> List[Path]:
    os.makedirs(root, exist_ok=True)
    paths = []
    for style, sents in sorted(split.sentences_by_style.items()):
        path = split_path(root, domain, split.name, style)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for s in sents:
                fh.write(s.text + "\n")
        paths.append(path)
    return paths


def load_references(path, n_refs: int, test: DatasetSplit) -> ReferenceSet:
    """Load ``reference.<source>.<style>`` files aligned with ``test``.

    A line holding ``source<TAB>reference`` (the original release format)
    keeps only the last field.
    """
    root = Path(path)
    sources = sorted({p.name.split(".")[1] for p in root.glob("reference.*.*") if len(p.name.split(".")) == 3})
    if len(sources) != n_refs:
        raise CorpusLoadError(f"expected {n_refs} reference sources in {root}, found {sources}")
    refs: Dict[Tuple[int, int], List[Tuple[str, ...]]] = {}
    for style in test.styles:
        n_test = len(test.sentences_by_style[style])
        for source in sources:
            lines = _read_lines(root / f"reference.{source}.{style}")
            if len(lines) != n_test:
                raise AlignmentError(f"reference.{source}.{style} vs test style {style}", n_test, len(lines))
            for i, line in enumerate(lines):
                refs.setdefault((i, style), []).append(tuple(line.split("\t")[-1].split()))
    return ReferenceSet(refs, sources)


def subsample(split: DatasetSplit, n_per_style: int, seed: int) -> DatasetSplit:
    """Draw exactly ``n_per_style`` sentences per style, keeping file order."""
    out = {}
    for style in split.styles:
        sents = split.sentences_by_style[style]
        if n_per_style > len(sents):
            raise SubsampleSizeError(f"style {style}: asked for {n_per_style}, only {len(sents)} available")
        rng = random.Random(f"{seed}:{style}")
        idx = sorted(rng.sample(range(len(sents)), n_per_style))
        out[style] = [sents[i] for i in idx]
    return DatasetSplit(split.name, out)
