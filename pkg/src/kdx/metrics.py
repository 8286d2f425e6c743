"""Performance statistics: 0-1 error, Hellinger distance, calibration errors
in and out of distribution, and the relative-improvement statistic."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, UndefinedImprovementError

DEFAULT_BINS = 15
_SUM_TOL = 1e-6


def _check_distribution(p, name="distribution"):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise InvalidInputError(f"{name} must be a vector")
    if (p < 0).any():
        raise InvalidInputError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > _SUM_TOL:
        raise InvalidInputError(f"{name} does not sum to 1")
    return p


def _check_rows(P, name="posteriors"):
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D array")
    if (P < 0).any():
        raise InvalidInputError(f"{name} has negative entries")
    if np.abs(P.sum(axis=1) - 1.0).max() > _SUM_TOL:
        raise InvalidInputError(f"{name} rows do not sum to 1")
    return P


def hellinger_distance(p, q) -> float:
    """H(p, q) = ||sqrt(p) - sqrt(q)||_2 / sqrt(2), a metric on distributions."""
    p = _check_distribution(p, "p")
    q = _check_distribution(q, "q")
    if p.shape != q.shape:
        raise InvalidInputError("p and q must have the same length")
    h2 = 0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)
    return float(min(np.sqrt(max(h2, 0.0)), 1.0))


def mean_hellinger(P, Q) -> float:
    """Arithmetic mean of row-wise Hellinger distances."""
    P = _check_rows(P, "P")
    Q = _check_rows(Q, "Q")
    if P.shape != Q.shape:
        raise InvalidInputError("P and Q must have the same shape")
    h2 = 0.5 * np.sum((np.sqrt(P) - np.sqrt(Q)) ** 2, axis=1)
    return float(np.minimum(np.sqrt(np.maximum(h2, 0.0)), 1.0).mean())


def mce(confidences, correctness, bins: int = DEFAULT_BINS) -> float:
    """Maximum calibration error over equal-width confidence bins.

    Bins are left-closed/right-open with the last bin closed at 1.0;
    empty bins are skipped.
    """
    confidences = np.asarray(confidences, dtype=np.float64)
    correctness = np.asarray(correctness, dtype=np.float64)
    if confidences.shape != correctness.shape or confidences.ndim != 1:
        raise InvalidInputError("confidences and correctness must be equal-length vectors")
    if confidences.size == 0:
        raise InvalidInputError("need at least one prediction")
    if (confidences < 0).any() or (confidences > 1).any():
        raise InvalidInputError("confidences must lie in [0, 1]")
    if bins < 1:
        raise InvalidInputError("bins must be >= 1")
    idx = np.minimum((confidences * bins).astype(int), bins - 1)
    worst = 0.0
    for b in range(bins):
        mask = idx == b
        if not mask.any():
            continue
        gap = abs(correctness[mask].mean() - confidences[mask].mean())
        worst = max(worst, gap)
    return float(worst)


def oce(posteriors, priors) -> float:
    """Mean absolute gap between each row's max posterior and the max prior."""
    P = _check_rows(posteriors)
    priors = _check_distribution(priors, "priors")
    if P.shape[1] != priors.shape[0]:
        raise InvalidInputError("posterior rows and priors disagree on class count")
    return float(np.abs(P.max(axis=1) - priors.max()).mean())


def mean_max_confidence(posteriors) -> float:
    P = _check_rows(posteriors)
    return float(P.max(axis=1).mean())


def improvement(parent_stat: float, method_stat: float) -> float:
    """(parent - method) / parent: positive iff the method beats its parent."""
    if parent_stat == 0:
        raise UndefinedImprovementError("parent statistic is zero")
    if parent_stat < 0:
        raise InvalidInputError("parent statistic must be positive")
    return (parent_stat - method_stat) / parent_stat


def classification_error(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise InvalidInputError("predictions and labels must be equal-length vectors")
    if predictions.size == 0:
        raise InvalidInputError("need at least one prediction")
    return float(np.mean(predictions != labels))
