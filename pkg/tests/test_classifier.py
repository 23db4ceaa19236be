import numpy as np
import pytest
import torch

from stable_style.classifier import ClassifierConfig, StyleClassifier, TextCNN, accuracy, train_classifier
from stable_style.corpus import DatasetSplit, StyledSentence
from stable_style.errors import ConfigError, InputError, TrainingError
from stable_style.tokenizer import train_bpe


def _random_seqs(vocab, n, rng, max_len=20):
    lo = len(vocab.specials)
    return [rng.integers(lo, len(vocab), size=rng.integers(1, max_len + 1)).tolist() for _ in range(n)]


def test_default_architecture(vocab):
    cfg = ClassifierConfig()
    assert (cfg.embed_dim, cfg.filter_widths, cfg.dropout) == (256, [1, 2, 3, 4, 5], 0.5)
    m = TextCNN(len(vocab), 2, cfg)
    assert m.embedding.weight.shape == (len(vocab), 256)
    assert len(m.convs) == 5 and m.out.out_features == 2
    ev = ClassifierConfig.evaluation_default(seed=4)
    assert ev.filter_widths == [2, 3, 4] and ev.seed == 4


def test_invalid_config():
    with pytest.raises(ConfigError):
        ClassifierConfig(filter_widths=[])
    with pytest.raises(ConfigError):
        ClassifierConfig(dropout=1.0)


def test_learns_synthetic_styles(small_clf, corpus):
    test = corpus[0]["test"]
    seqs = [small_clf.vocab.encode(s.tokens) for s in test]
    assert accuracy(small_clf, seqs, [s.style for s in test]) > 0.9
    assert len(small_clf.history) == 4


def test_probabilities_valid(small_clf, vocab):
    rng = np.random.default_rng(0)
    p = small_clf.predict_proba_batch(_random_seqs(vocab, 50, rng))
    assert p.shape == (50, 2)
    np.testing.assert_allclose(p.sum(1), 1.0, atol=1e-12)
    assert (p >= 0).all()


def test_batch_equals_single_bitwise(small_clf, vocab):
    rng = np.random.default_rng(1)
    seqs = _random_seqs(vocab, 40, rng)
    batch = small_clf.predict_proba_batch(seqs)
    single = np.stack([small_clf.predict_proba(s) for s in seqs])
    assert np.array_equal(batch, single)


def test_lookup_path_matches_torch_path(small_clf, vocab):
    rng = np.random.default_rng(2)
    seqs = _random_seqs(vocab, 40, rng)
    with torch.no_grad():
        ref = torch.softmax(small_clf.logits(seqs), -1).double().numpy()
    np.testing.assert_allclose(small_clf.predict_proba_batch(seqs), ref, atol=1e-5)


def test_short_sequences_accepted(small_clf):
    # shorter than the widest filter: padded and masked, not rejected
    p = small_clf.predict_proba([small_clf.vocab.encode(["good"])[0]])
    assert p.shape == (2,)


def test_empty_sequence_rejected(small_clf):
    with pytest.raises(InputError):
        small_clf.predict_proba_batch([[]])


def test_soft_rejects_unnormalised(small_clf, vocab):
    d = torch.full((3, len(vocab)), 1.0 / len(vocab))
    d[1, 5] += 0.01
    with pytest.raises(InputError):
        small_clf.predict_proba_soft(d)
    with pytest.raises(ConfigError):
        small_clf.predict_proba_soft(torch.ones(3, 7) / 7)


def test_soft_padding_positions_ignored(small_clf, vocab):
    ids = vocab.encode(["the", "food", "was", "great", "."])
    d = torch.nn.functional.one_hot(torch.as_tensor(ids), len(vocab)).float()[None]
    garbage = torch.rand(1, 4, len(vocab))
    padded = torch.cat([d, garbage], dim=1)
    a = small_clf.predict_proba_soft(d, torch.as_tensor([len(ids)]))
    b = small_clf.predict_proba_soft(padded, torch.as_tensor([len(ids)]))
    torch.testing.assert_close(a, b)


def test_soft_is_differentiable_and_frozen_weights_untouched(small_clf, vocab):
    small_clf.freeze()
    before = small_clf.model.embedding.weight.clone()
    logits = torch.randn(1, 6, len(vocab), requires_grad=True)
    p = small_clf.predict_proba_soft(torch.softmax(logits, -1))
    p[0, 1].backward()
    assert logits.grad is not None and torch.isfinite(logits.grad).all() and logits.grad.abs().sum() > 0
    assert torch.equal(before, small_clf.model.embedding.weight)
    assert small_clf.model.embedding.weight.grad is None


def test_deterministic_training(corpus, vocab):
    cfg = ClassifierConfig(embed_dim=16, maps_per_filter=8, epochs=1, seed=3)
    a = train_classifier(corpus[0]["train"], None, cfg, vocab)
    b = train_classifier(corpus[0]["train"], None, cfg, vocab)
    for x, y in zip(a.model.parameters(), b.model.parameters()):
        assert torch.equal(x, y)


def test_needs_two_styles(corpus, vocab):
    one = DatasetSplit("train", {0: corpus[0]["train"].sentences_by_style[0], 1: []})
    with pytest.raises(TrainingError):
        train_classifier(one, None, ClassifierConfig(epochs=1), vocab)


def test_non_contiguous_style_ids():
    sents = {3: [StyledSentence.from_text("bad food .", 3)] * 20, 7: [StyledSentence.from_text("good food .", 7)] * 20}
    split = DatasetSplit("train", sents)
    v = train_bpe(split, 40, styles=(3, 7))
    clf = train_classifier(split, None, ClassifierConfig(embed_dim=8, maps_per_filter=4, epochs=20), v)
    p = clf.proba_words([["bad", "food", "."], ["good", "food", "."]])
    assert p[0].argmax() == 0 and p[1].argmax() == 1  # columns follow vocab.styles order


def test_save_load_roundtrip(small_clf, vocab, tmp_path, corpus):
    path = tmp_path / "clf.pt"
    small_clf.save(path, seed=0)
    clf = StyleClassifier.load(path, vocab)
    words = [list(s.tokens) for s in corpus[0]["test"]]
    assert np.array_equal(clf.proba_words(words), small_clf.proba_words(words))


def test_load_rejects_other_vocab(small_clf, corpus, tmp_path):
    path = tmp_path / "clf.pt"
    small_clf.save(path)
    other = train_bpe(corpus[0]["train"], 200)
    with pytest.raises(ConfigError):
        StyleClassifier.load(path, other)
