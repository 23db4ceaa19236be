import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stable_style.evaluation.report import EvalReport
from stable_style.evaluation.stability import stability_report, thresholds


def rep(name, **kw):
    return EvalReport(name, **kw)


def test_threshold_formula():
    v = [1.0, 2.0, 3.0, 4.0]
    sd = np.std(v, ddof=1)
    assert thresholds(v) == pytest.approx(2.5 - 1.96 * sd / 2)
    assert thresholds(v, margin="std") == pytest.approx(2.5 - 1.96 * sd)
    with pytest.raises(ValueError):
        thresholds(v, margin="iqr")


def test_flags_low_semantic():
    reports = [rep(f"s{i}", semantic=v) for i, v in enumerate([90, 91, 89, 90, 80])]
    stability_report(reports)
    assert [r.system_name for r in reports if r.flags] == ["s4"]
    assert reports[4].flags == {"semantic"} and not reports[4].stable


def test_perplexity_flags_high_values():
    reports = [rep(f"s{i}", d_ppl=v, g_ppl=v) for i, v in enumerate([100, 110, 105, 400])]
    stability_report(reports)
    assert reports[3].flags == {"t_ppl"}


def test_single_system_warns(caplog):
    r = [rep("only", semantic=50)]
    with caplog.at_level(logging.WARNING):
        stability_report(r)
    assert r[0].flags == set() and "at least two" in caplog.text


def test_equal_values_never_flagged():
    reports = [rep(f"s{i}", semantic=0.1 + 0.2) for i in range(7)]
    stability_report(reports)
    assert all(r.stable for r in reports)


def test_missing_metric_skipped():
    reports = [rep("a", semantic=90), rep("b"), rep("c", semantic=10)]
    stability_report(reports)
    assert reports[1].flags == set()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=15))
def test_flag_iff_below_threshold(values):
    reports = [rep(str(i), semantic=v) for i, v in enumerate(values)]
    stability_report(reports)
    if max(values) == min(values):
        assert all(r.stable for r in reports)
        return
    cut = thresholds(values)
    for r, v in zip(reports, values):
        assert ("semantic" in r.flags) == (v < cut)
    # the best system is never flagged
    assert reports[int(np.argmax(values))].stable


def test_reruns_identical():
    mk = lambda: [rep(f"s{i}", semantic=v, s_bleu=v / 2, h_bleu=v / 3) for i, v in enumerate([70, 80, 90, 30])]
    a, b = stability_report(mk()), stability_report(mk())
    assert [r.flags for r in a] == [r.flags for r in b]
