import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stable_style.corpus import StyledSentence
from stable_style.deleter import (ALPHA_REACHED, BETA_FLOOR, EXHAUSTED, DeleterConfig, DeletionTrace, delete,
                                  delete_many, importance_scores, read_traces, write_traces)
from stable_style.errors import InputError
from toy_scorers import NEGATIVE, POSITIVE, LexiconScorer

WORDS = sorted(POSITIVE) + sorted(NEGATIVE) + ["the", "food", "was", "and", "service", "."]


def test_config_validation():
    with pytest.raises(InputError):
        DeleterConfig(alpha=1.5)
    with pytest.raises(InputError):
        DeleterConfig(beta=-0.1)
    assert DeleterConfig() == DeleterConfig(0.7, 0.5)


def test_importance_scores_are_probability_drops():
    sc = LexiconScorer()
    words = "the food was great and good".split()
    is_ = importance_scores(sc, words, 1)
    p = sc.proba_words([words])[0, 1]
    for i in range(len(words)):
        q = sc.proba_words([words[:i] + words[i + 1:]])[0, 1]
        assert is_[i] == pytest.approx(p - q, abs=1e-15)
    assert is_.argmax() == 3  # "great"
    assert is_[0] == pytest.approx(0.0)


def test_importance_scores_errors():
    with pytest.raises(InputError):
        importance_scores(LexiconScorer(), [], 0)
    with pytest.raises(InputError):
        importance_scores(LexiconScorer(), ["great"], 1)


def test_deletes_markers_first():
    s = StyledSentence.from_text("the food was great and the staff friendly .", 1)
    t = delete(LexiconScorer(), s, DeleterConfig(0.7, 0.3))
    assert t.deleted[:2] == ["great", "friendly"]
    assert t.stop_reason == ALPHA_REACHED
    assert t.content == "the food was and the staff .".split()


def test_leftmost_tie_break():
    s = StyledSentence.from_text("good x tasty y", 1)  # good and tasty both weigh 1.0
    t = delete(LexiconScorer(), s, DeleterConfig(0.0, 0.0))
    assert t.steps[0].word == "good" and t.steps[0].word_index == 0


def test_alpha_checked_before_deleting():
    # a sentence already below alpha is left untouched
    s = StyledSentence.from_text("the food was bad", 1)
    t = delete(LexiconScorer(), s, DeleterConfig(0.7, 0.0))
    assert t.steps == [] and t.stop_reason == ALPHA_REACHED and t.content == list(s.tokens)


def test_beta_floor_is_prospective():
    s = StyledSentence.from_text("great great great great", 1)
    t = delete(LexiconScorer(), s, DeleterConfig(0.0, 0.5))
    # 4 -> 3 (0.75) -> 2 (0.5); a third deletion would leave 0.25 < 0.5
    assert len(t.steps) == 2 and t.stop_reason == BETA_FLOOR
    assert len(t.content) / len(s) >= 0.5


def test_exhausted_keeps_one_word():
    s = StyledSentence.from_text("great good love", 1)
    t = delete(LexiconScorer(bias=10.0), s, DeleterConfig(0.0, 0.0))
    assert t.stop_reason == EXHAUSTED and len(t.content) == 1


def test_single_word_sentence():
    t = delete(LexiconScorer(), StyledSentence.from_text("great", 1), DeleterConfig(0.0, 0.0))
    assert t.steps == [] and t.stop_reason == EXHAUSTED


def test_trace_probabilities_chain():
    s = StyledSentence.from_text("awful rude bland food and bad service .", 0)
    sc = LexiconScorer()
    t = delete(sc, s, DeleterConfig(0.6, 0.0))
    assert t.steps[0].prob_before == pytest.approx(sc.proba_words([list(s.tokens)])[0, 0])
    for a, b in zip(t.steps, t.steps[1:]):
        assert b.prob_before == a.prob_after
    for st_ in t.steps:
        assert st_.importance_score == pytest.approx(st_.prob_before - st_.prob_after)
    # original positions reconstruct the content
    gone = {st_.word_index for st_ in t.steps}
    assert [w for i, w in enumerate(s.tokens) if i not in gone] == t.content


sentence = st.lists(st.sampled_from(WORDS), min_size=1, max_size=12)


@settings(max_examples=200, deadline=None)
@given(sentence, st.sampled_from([0, 1]), st.floats(0, 1), st.floats(0, 1))
def test_stop_conditions_hold(words, style, alpha, beta):
    s = StyledSentence(tuple(words), style)
    sc = LexiconScorer()
    t = delete(sc, s, DeleterConfig(alpha, beta))
    n = len(words)
    assert len(t.content) + len(t.steps) == n and len(t.content) >= 1
    # every performed deletion was allowed
    for k, step in enumerate(t.steps):
        assert step.prob_before >= alpha
        assert (n - k - 1) / n >= beta
    final_p = sc.proba_words([t.content])[0, style]
    if t.stop_reason == ALPHA_REACHED:
        assert final_p < alpha
    elif t.stop_reason == BETA_FLOOR:
        assert final_p >= alpha and (len(t.content) - 1) / n < beta
    else:
        assert t.stop_reason == EXHAUSTED and len(t.content) == 1


@settings(max_examples=100, deadline=None)
@given(sentence, st.sampled_from([0, 1]))
def test_same_path_for_all_thresholds(words, style):
    s = StyledSentence(tuple(words), style)
    full = delete(LexiconScorer(), s, DeleterConfig(0.0, 0.0))
    for a, b in [(0.5, 0.25), (0.9, 0.0), (0.7, 0.5)]:
        t = delete(LexiconScorer(), s, DeleterConfig(a, b))
        assert t.deleted == full.deleted[: len(t.deleted)]


def test_with_cnn_scorer(small_clf, corpus):
    sents = list(corpus[0]["test"])[:20]
    traces = delete_many(small_clf, sents, DeleterConfig(0.7, 0.5))
    assert len(traces) == 20
    assert np.mean([len(t.steps) for t in traces]) > 0


def test_trace_jsonl_roundtrip(tmp_path):
    sents = [StyledSentence.from_text(x, 1) for x in ("the food was great .", "good and tasty")]
    traces = delete_many(LexiconScorer(), sents, DeleterConfig(0.5, 0.0))
    write_traces(traces, tmp_path / "t.jsonl")
    back = read_traces(tmp_path / "t.jsonl")
    assert back == traces
    assert isinstance(back[0], DeletionTrace)
