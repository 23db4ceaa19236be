"""Instability flags: systems far below the cross-system mean on some metric.

For each metric (oriented so that larger is better; perplexities are negated)
the threshold is the lower 95% confidence bound of the mean across systems,
``mean - z * std / sqrt(n)``. With ``margin="std"`` the bound is
``mean - z * std`` instead. Systems strictly below the threshold are flagged.
"""

from __future__ import annotations

import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from .report import EvalReport

logger = logging.getLogger(__name__)

# metric name -> +1 when larger is better, -1 when smaller is better
DEFAULT_METRICS = {"g_bleu": 1, "style_accuracy": 1, "t_ppl": -1, "semantic": 1}


def thresholds(values: Sequence[float], z: float = 1.96, margin: str = "sem") -> float:
    a = np.asarray(values, dtype=float)
    std = a.std(ddof=1) if len(a) > 1 else 0.0
    if margin == "sem":
        width = z * std / math.sqrt(len(a))
    elif margin == "std":
        width = z * std
    else:
        raise ValueError(f"unknown margin {margin!r}")
    return float(a.mean() - width)


def stability_report(reports: List[EvalReport], metrics: Optional[Dict[str, int]] = None,
                     z: float = 1.96, margin: str = "sem") -> List[EvalReport]:
    """Attach ``flags`` (names of unstable metrics) to every report in place."""
    metrics = metrics or DEFAULT_METRICS
    for r in reports:
        r.flags = set()
    if len(reports) < 2:
        logger.warning("stability needs at least two systems; no flags computed for %d", len(reports))
        return reports
    if len(reports) < 3:
        logger.warning("only %d systems: the cross-system distribution is barely defined", len(reports))
    for name, sign in metrics.items():
        scored = [(r, getattr(r, name)) for r in reports if getattr(r, name) is not None]
        if len(scored) < 2:
            continue
        oriented = [sign * v for _, v in scored]
        if max(oriented) == min(oriented):
            continue
        cut = thresholds(oriented, z, margin)
        for (r, _), v in zip(scored, oriented):
            if v < cut:
                r.flags.add(name)
    return reports
