"""Discrimination (AUC) and calibration (ICI) metrics.

AUC is the Mann-Whitney pair statistic computed through midranks, which
equals the brute-force fraction of (positive, negative) pairs won, ties
counted one half.

ICI smooths the observed outcomes against the predicted probabilities with
a local-linear tricube smoother (span 0.75) and averages the absolute gap
between the smoothed curve and the predictions over the observations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

LOESS_SPAN = 0.75


class MetricError(ValueError):
    pass


def _check_binary(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if not np.all(np.isin(uniq, (0, 1))):
        raise MetricError("labels must be 0/1")
    if len(uniq) < 2:
        raise MetricError("labels contain a single class")
    return labels.astype(float)


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(sx):
        j = i
        while j + 1 < len(sx) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """P(score_pos > score_neg) + 0.5 * P(tie) over all pos/neg pairs."""
    scores = np.asarray(scores, dtype=float)
    labels = _check_binary(labels)
    if len(scores) != len(labels):
        raise MetricError("scores and labels lengths differ")
    n_pos = labels.sum()
    n_neg = len(labels) - n_pos
    ranks = _midranks(scores)
    r_pos = ranks[labels == 1].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


LOESS_EXACT_LIMIT = 2000
LOESS_GRID_POINTS = 400


def _loess_at(xs: np.ndarray, ys: np.ndarray, q: int, positions: np.ndarray,
              chunk: int = 512) -> np.ndarray:
    """Local-linear tricube fits at sorted positions, windows over all points."""
    n = len(xs)
    starts = np.empty(len(positions), dtype=np.int64)
    left = 0
    for k, i in enumerate(positions):
        while left + q < n and xs[left + q] - xs[i] < xs[i] - xs[left]:
            left += 1
        starts[k] = left
    offsets = np.arange(q)

    fitted = np.empty(len(positions))
    for a in range(0, len(positions), chunk):
        b = min(a + chunk, len(positions))
        idx = starts[a:b, None] + offsets[None, :]
        Xw = xs[idx]
        Yw = ys[idx]
        x0 = xs[positions[a:b], None]
        D = np.abs(Xw - x0)
        H = D.max(axis=1, keepdims=True)
        W = np.where(H > 0, (1 - np.clip(D / np.where(H > 0, H, 1.0), 0, 1) ** 3) ** 3, 1.0)
        sw = W.sum(axis=1)
        swx = (W * Xw).sum(axis=1)
        swy = (W * Yw).sum(axis=1)
        swxx = (W * Xw * Xw).sum(axis=1)
        swxy = (W * Xw * Yw).sum(axis=1)
        denom = sw * swxx - swx * swx
        safe = np.abs(denom) > 1e-12 * np.maximum(sw * swxx, 1e-300)
        slope = np.where(safe, (sw * swxy - swx * swy) / np.where(safe, denom, 1.0), 0.0)
        intercept = np.where(safe, (swy - slope * swx) / sw, swy / sw)
        fitted[a:b] = intercept + slope * xs[positions[a:b]]
    return fitted


def loess_smooth(x: np.ndarray, y: np.ndarray, span: float = LOESS_SPAN) -> np.ndarray:
    """Local-linear tricube smoother evaluated at every x, in input order.

    Above LOESS_EXACT_LIMIT points the fit is computed at a quantile grid of
    evaluation points and linearly interpolated in between (the standard
    large-n loess evaluation strategy); below it every point is fitted
    exactly.
    """
    n = len(x)
    q = max(2, int(np.ceil(span * n)))
    q = min(q, n)
    order = np.argsort(x, kind="mergesort")
    xs, ys = x[order], y[order]

    if n <= LOESS_EXACT_LIMIT:
        fitted = _loess_at(xs, ys, q, np.arange(n))
    else:
        positions = np.unique(
            np.round(np.linspace(0, n - 1, LOESS_GRID_POINTS)).astype(np.int64)
        )
        grid_fit = _loess_at(xs, ys, q, positions)
        fitted = np.interp(xs, xs[positions], grid_fit)

    out = np.empty(n)
    out[order] = fitted
    return out


def ici(probs, labels) -> float:
    """Mean |smoothed observed rate - predicted probability| over observations."""
    probs = np.asarray(probs, dtype=float)
    labels = _check_binary(labels)
    if len(probs) != len(labels):
        raise MetricError("probs and labels lengths differ")
    if len(probs) < 20:
        raise MetricError("ici needs at least 20 observations")
    smoothed = loess_smooth(probs, labels)
    return float(np.mean(np.abs(smoothed - probs)))


@dataclass(frozen=True)
class Metrics:
    """Cross-validated discrimination/calibration summary (fold means)."""

    auc: float
    ici: float
    fold_values: Tuple[Tuple[float, float], ...]

    @classmethod
    def from_folds(cls, fold_values: Sequence[Tuple[float, float]]) -> "Metrics":
        arr = np.asarray(fold_values, dtype=float)
        return cls(
            auc=float(arr[:, 0].mean()),
            ici=float(arr[:, 1].mean()),
            fold_values=tuple((float(a), float(b)) for a, b in arr),
        )
