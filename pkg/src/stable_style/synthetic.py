"""Small template-generated review corpus with sentiment markers.

Used by the test-suite and ``sst synth-data`` as an offline stand-in for the
Yelp/Amazon releases. Every sentence mixes neutral content words with one or
two sentiment words; the reference for a sentence swaps each sentiment word
for its antonym, which makes a gold transfer available for human-BLEU.
"""

from __future__ import annotations

import random
from typing import Dict, List, Tuple

from .corpus import DatasetSplit, StyledSentence, write_split

NEGATIVE, POSITIVE = 0, 1

# (negative, positive) antonym pairs
ADJECTIVES = [
    ("terrible", "great"), ("awful", "amazing"), ("bland", "delicious"), ("rude", "friendly"),
    ("horrible", "excellent"), ("cold", "fresh"), ("slow", "quick"), ("dirty", "clean"),
    ("mediocre", "wonderful"), ("overpriced", "affordable"), ("stale", "tasty"), ("unhelpful", "helpful"),
]
VERBS = [("hate", "love"), ("avoid", "recommend"), ("regret", "enjoy")]
ENDINGS = [("never again", "definitely again"), ("what a waste", "what a treat")]
NOUNS = ["food", "service", "staff", "pizza", "waiter", "room", "burger", "coffee", "pasta",
         "salad", "manager", "bartender", "menu", "decor", "steak", "soup"]
PLACES = ["place", "restaurant", "bar", "cafe", "diner", "hotel", "shop", "bakery"]
ADVERBS = ["very", "really", "so", "pretty", "quite", "always", "just"]
TIMES = ["today", "yesterday", "last night", "on friday", "this weekend", "at lunch"]
PEOPLE = ["my wife", "my friend", "we", "my family", "my boss", "our group"]

TEMPLATES = [
    "the {noun} was {adv} {adj} .",
    "the {noun} is {adj} and the {noun2} is {adj2} .",
    "i {verb} this {place} .",
    "{people} went {time} and the {noun} was {adj} .",
    "the {noun} here is {adv} {adj} , {ending} .",
    "we {verb} the {noun} at this {place} .",
    "{people} thought the {noun} was {adj} .",
    "our {noun} came {time} and it was {adj} .",
    # marker-dense: the content-ratio floor stops deletion with a marker left
    "{adj} , {adj2} {noun} .",
    "{adj} {noun} , {adj2} {noun2} , {adj3} {place} .",
]


def _fill(template: str, style: int, rng: random.Random) -> Tuple[List[str], List[str]]:
    """Return (sentence, antonym-swapped reference) token lists."""
    adj = rng.choice(ADJECTIVES)
    adj2 = rng.choice(ADJECTIVES)
    adj3 = rng.choice(ADJECTIVES)
    verb = rng.choice(VERBS)
    ending = rng.choice(ENDINGS)
    noun, noun2 = rng.sample(NOUNS, 2)
    slots = dict(noun=noun, noun2=noun2, place=rng.choice(PLACES), adv=rng.choice(ADVERBS),
                 time=rng.choice(TIMES), people=rng.choice(PEOPLE))
    src = template.format(adj=adj[style], adj2=adj2[style], adj3=adj3[style], verb=verb[style], ending=ending[style], **slots)
    ref = template.format(adj=adj[1 - style], adj2=adj2[1 - style], adj3=adj3[1 - style], verb=verb[1 - style],
                          ending=ending[1 - style], **slots)
    return src.split(), ref.split()


def make_sentences(n: int, style: int, seed: int) -> Tuple[List[StyledSentence], List[List[str]]]:
    rng = random.Random(f"synthetic:{seed}:{style}")
    sents, refs = [], []
    for _ in range(n):
        src, ref = _fill(rng.choice(TEMPLATES), style, rng)
        sents.append(StyledSentence(tuple(src), style))
        refs.append(ref)
    return sents, refs


def make_corpus(n_train: int = 2000, n_dev: int = 200, n_test: int = 100,
                seed: int = 0) -> Tuple[Dict[str, DatasetSplit], Dict[int, List[List[str]]]]:
    """Build train/dev/test splits plus test references keyed by source style."""
    splits, refs = {}, {}
    for offset, (name, n) in enumerate([("train", n_train), ("dev", n_dev), ("test", n_test)]):
        by_style = {}
        for style in (NEGATIVE, POSITIVE):
            sents, r = make_sentences(n, style, seed * 1000 + offset)
            by_style[style] = sents
            if name == "test":
                refs[style] = r
        splits[name] = DatasetSplit(name, by_style)
    return splits, refs


def write_corpus(root, n_train: int = 2000, n_dev: int = 200, n_test: int = 100, seed: int = 0,
                 domain: str = "sentiment") -> None:
    """Write the corpus in the release layout, with one reference source ``synthetic``."""
    splits, refs = make_corpus(n_train, n_dev, n_test, seed)
    for split in splits.values():
        write_split(split, root, domain)
    for style, lines in refs.items():
        with open(f"{root}/reference.synthetic.{style}", "w", encoding="utf-8") as fh:
            for toks in lines:
                fh.write(" ".join(toks) + "\n")
