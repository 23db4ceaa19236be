"""Byte-pair-encoding vocabulary shared by the classifier, generator and LMs.

Words are split into characters; the last character of every word carries
the ``</w>`` suffix so word boundaries survive encoding. Merges are learned
greedily on word frequencies (most frequent adjacent pair first, ties broken
by the lexicographically smallest pair).
"""

from __future__ import annotations

import hashlib
import heapq
import json
from collections import Counter, defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

EOW = "</w>"
PAD, UNK, START, END = "<pad>", "<unk>", "<s>", "</s>"
FORMAT_VERSION = 1


class VocabularyError(Exception):
    pass


def style_token(style: int) -> str:
    return f"<style_{style}>"


def _word_symbols(word: str) -> List[str]:
    chars = list(word)
    chars[-1] = chars[-1] + EOW
    return chars


class Vocabulary:
    def __init__(self, merges: Sequence[Tuple[str, str]], symbols: Sequence[str], styles: Sequence[int]):
        self.merges = [tuple(m) for m in merges]
        self.styles = list(styles)
        specials = [PAD, UNK, START, END] + [style_token(s) for s in self.styles]
        self.specials = specials
        self.id_to_token = specials + [s for s in symbols if s not in specials]
        if len(set(self.id_to_token)) != len(self.id_to_token):
            raise VocabularyError("duplicate symbols in vocabulary")
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        self.ranks = {m: i for i, m in enumerate(self.merges)}
        self._cache: Dict[str, List[int]] = {}

    pad_id = 0
    unk_id = 1
    start_id = 2
    end_id = 3

    def style_id(self, style: int) -> int:
        try:
            return self.token_to_id[style_token(style)]
        except KeyError:
            raise VocabularyError(f"unknown style {style}") from None

    def __len__(self):
        return len(self.id_to_token)

    @property
    def special_ids(self) -> List[int]:
        return list(range(len(self.specials)))

    # -- encoding ---------------------------------------------------------

    def _bpe(self, word: str) -> List[str]:
        syms = _word_symbols(word)
        while len(syms) > 1:
            pairs = [(self.ranks.get((a, b), len(self.ranks)), i) for i, (a, b) in enumerate(zip(syms, syms[1:]))]
            rank, i = min(pairs)
            if rank == len(self.ranks):
                break
            syms = syms[:i] + [syms[i] + syms[i + 1]] + syms[i + 2:]
        return syms

    def encode_word(self, word: str) -> List[int]:
        ids = self._cache.get(word)
        if ids is None:
            syms = self._bpe(word)
            if all(s in self.token_to_id for s in syms):
                ids = [self.token_to_id[s] for s in syms]
            else:
                # an out-of-alphabet glyph turns the whole word into one unk
                ids = [self.unk_id]
            self._cache[word] = ids
        return list(ids)

    def encode(self, words: Iterable[str]) -> List[int]:
        out: List[int] = []
        for w in words:
            out.extend(self.encode_word(w))
        return out

    def encode_words(self, words: Iterable[str]) -> List[List[int]]:
        """Per-word id lists, used when deletions operate on whole words."""
        return [self.encode_word(w) for w in words]

    def decode(self, ids: Iterable[int], raw: bool = False) -> List[str]:
        n = len(self.id_to_token)
        words: List[str] = []
        buf = ""
        for i in ids:
            i = int(i)
            if not 0 <= i < n:
                raise IndexError(f"token id {i} outside vocabulary of size {n}")
            tok = self.id_to_token[i]
            if i < len(self.specials):
                if buf:
                    words.append(buf)
                    buf = ""
                if raw:
                    words.append(tok)
                continue
            if tok.endswith(EOW):
                words.append(buf + tok[: -len(EOW)])
                buf = ""
            else:
                buf += tok
        if buf:
            words.append(buf)
        return words

    # -- persistence ------------------------------------------------------

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps({"v": FORMAT_VERSION, "styles": self.styles, "merges": self.merges,
                             "tokens": self.id_to_token}, ensure_ascii=False).encode("utf-8"))
        return h.hexdigest()

    def save(self, directory) -> None:
        """Write ``merges.txt`` (one space-separated pair per line) and ``vocab.tsv`` (token<TAB>id)."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "merges.txt", "w", encoding="utf-8") as fh:
            fh.write(f"#version: {FORMAT_VERSION} styles: {' '.join(map(str, self.styles))}\n")
            for a, b in self.merges:
                fh.write(f"{a} {b}\n")
        with open(d / "vocab.tsv", "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self.id_to_token):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, directory) -> "Vocabulary":
        d = Path(directory)
        with open(d / "merges.txt", encoding="utf-8") as fh:
            header = fh.readline().split()
            if header[:2] != ["#version:", str(FORMAT_VERSION)]:
                raise VocabularyError(f"unsupported merges file header: {' '.join(header)}")
            styles = [int(s) for s in header[3:]]
            merges = [tuple(line.rstrip("\n").split(" ")) for line in fh if line.strip()]
        tokens = []
        with open(d / "vocab.tsv", encoding="utf-8") as fh:
            for line in fh:
                tok, idx = line.rstrip("\n").rsplit("\t", 1)
                if int(idx) != len(tokens):
                    raise VocabularyError("vocab.tsv ids must be contiguous")
                tokens.append(tok)
        n_special = 4 + len(styles)
        return cls(merges, tokens[n_special:], styles)


def train_bpe(sentences: Iterable, vocab_size: int, styles: Sequence[int] = (0, 1)) -> Vocabulary:
    """Learn merges until the vocabulary reaches ``vocab_size`` or no adjacent pair is left.

    ``sentences`` may hold StyledSentence objects or plain token lists.
    """
    word_freq: Counter = Counter()
    for s in sentences:
        word_freq.update(getattr(s, "tokens", s))
    if not word_freq:
        raise VocabularyError("cannot train BPE on an empty corpus")

    words = {w: _word_symbols(w) for w in word_freq}
    base = sorted({sym for syms in words.values() for sym in syms})
    n_special = 4 + len(styles)
    if vocab_size <= len(base) + n_special:
        raise VocabularyError(
            f"vocab_size {vocab_size} must exceed {len(base)} base symbols + {n_special} specials")

    pair_freq: Counter = Counter()
    where: Dict[Tuple[str, str], set] = defaultdict(set)
    for w, syms in words.items():
        for p in zip(syms, syms[1:]):
            pair_freq[p] += word_freq[w]
            where[p].add(w)
    # max-heap on (count, smallest pair); stale entries are skipped on pop
    heap = [(-c, p) for p, c in pair_freq.items()]
    heapq.heapify(heap)

    merges: List[Tuple[str, str]] = []
    symbols = list(base)
    known = set(symbols)
    while len(symbols) + n_special < vocab_size and heap:
        negc, pair = heapq.heappop(heap)
        if pair_freq.get(pair, 0) != -negc or negc == 0:
            continue
        a, b = pair
        merged = a + b
        merges.append(pair)
        if merged not in known:
            symbols.append(merged)
            known.add(merged)
        touched = set()
        for w in sorted(where.pop(pair, ())):
            syms = words[w]
            new, i = [], 0
            while i < len(syms):
                if i < len(syms) - 1 and syms[i] == a and syms[i + 1] == b:
                    new.append(merged)
                    i += 2
                else:
                    new.append(syms[i])
                    i += 1
            f = word_freq[w]
            for p in zip(syms, syms[1:]):
                pair_freq[p] -= f
                touched.add(p)
            for p in zip(new, new[1:]):
                pair_freq[p] += f
                where[p].add(w)
                touched.add(p)
            words[w] = new
        for p in touched:
            c = pair_freq[p]
            if c > 0:
                heapq.heappush(heap, (-c, p))
            else:
                pair_freq.pop(p, None)
                where.pop(p, None)
    return Vocabulary(merges, symbols, styles)
