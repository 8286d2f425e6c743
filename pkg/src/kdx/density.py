"""Per-polytope Gaussian kernels fitted by weighted MLE, and the resulting
calibrated classifier.

Each populated polytope carries a diagonal-covariance Gaussian fitted to
all training points, weighted by their polytope's similarity to this
one. Class-conditional densities evaluate only the single nearest
kernel; a small additive bias floors the densities so posteriors far
from the training data collapse to the empirical class priors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import InvalidInputError
from .kernels import (
    PolytopeGrouping,
    WeightMatrix,
    exponentiate_weights,
    forest_kernel_matrix,
    group_polytopes,
    net_kernel_matrix,
    representative_kernel_matrix,
    stack_forest_leaves,
    stack_net_bits,
)
from .signatures import FOREST, MembershipSignature

EUCLIDEAN = "euclidean"
GEODESIC = "geodesic"

_LOG_2PI = math.log(2.0 * math.pi)
# exp() overflows near 709; past this we drop the (negligible) bias term
# and work with density ratios directly.
_LOG_HUGE = 700.0

# b = exp(-10^sqrt(d)) underflows to exactly 0 in float64 once d >= 9;
# clamp so the bias stays a positive floor.
_MIN_BIAS = 1e-300


def default_bias(dimension: int) -> float:
    return max(math.exp(-(10.0 ** math.sqrt(dimension))), _MIN_BIAS)


def weighted_mle_gaussian(points, weights, lam: float):
    """Weighted maximum-likelihood Gaussian with diagonal covariance.

    center = sum_i w_i x_i / sum_i w_i
    variance_j = (sum_i w_i (x_ij - center_j)^2 + lam) / sum_i w_i

    The regularizer lam keeps every variance strictly positive.
    """
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if points.ndim != 2:
        raise InvalidInputError("points must be a 2-D array")
    if weights.shape != (points.shape[0],):
        raise InvalidInputError("weights must be a vector matching the point count")
    if not np.isfinite(points).all() or not np.isfinite(weights).all():
        raise InvalidInputError("points and weights must be finite")
    if (weights < 0).any():
        raise InvalidInputError("weights must be non-negative")
    if lam <= 0:
        raise InvalidInputError("lam must be > 0")
    total = weights.sum()
    if total <= 0:
        raise InvalidInputError("weights must not all be zero")
    center = weights @ points / total
    dev = points - center
    variance = (weights @ (dev * dev) + lam) / total
    return center, variance


@dataclass
class PolytopeModel:
    """One populated polytope: Gaussian kernel plus reweighted class counts."""

    center: np.ndarray
    variance_diag: np.ndarray
    weighted_class_counts: np.ndarray
    representative_signature: MembershipSignature
    member_count: int


@dataclass(eq=False)
class KdxModel:
    """Fitted kernel-density forest/network; immutable after fit."""

    polytopes: list[PolytopeModel]
    class_priors: np.ndarray
    bias: float
    sample_count: int
    distance_mode: str
    class_weight_totals: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def populated_count(self) -> int:
        return len(self.polytopes)

    @property
    def class_count(self) -> int:
        return self.class_priors.shape[0]

    @property
    def signature_kind(self) -> str:
        return self.polytopes[0].representative_signature.kind

    def centers(self) -> np.ndarray:
        if "centers" not in self._cache:
            self._cache["centers"] = np.vstack([p.center for p in self.polytopes])
        return self._cache["centers"]

    def variances(self) -> np.ndarray:
        if "variances" not in self._cache:
            self._cache["variances"] = np.vstack([p.variance_diag for p in self.polytopes])
        return self._cache["variances"]

    def count_ratios(self) -> np.ndarray:
        """(p, K) matrix of w_ry / w_y, zero where a class has no weight at all."""
        if "ratios" not in self._cache:
            counts = np.vstack([p.weighted_class_counts for p in self.polytopes])
            totals = self.class_weight_totals
            ratios = np.divide(
                counts, totals, out=np.zeros_like(counts), where=totals > 0
            )
            self._cache["ratios"] = ratios
        return self._cache["ratios"]

    def representative_stack(self):
        if "reps" not in self._cache:
            reps = [p.representative_signature for p in self.polytopes]
            if self.signature_kind == FOREST:
                self._cache["reps"] = stack_forest_leaves(reps)
            else:
                self._cache["reps"] = stack_net_bits(reps)
        return self._cache["reps"]


def fit_kdx(
    data: Dataset,
    grouping: PolytopeGrouping,
    weights: WeightMatrix,
    lam: float = 1e-6,
    bias: float | None = None,
    distance_mode: str = EUCLIDEAN,
) -> KdxModel:
    """Fit Gaussians and reweighted class counts over the populated polytopes.

    For polytope r, sample i contributes with weight w[r, polytope(i)],
    so members (weight 1) dominate and similar polytopes pull the kernel
    toward the local neighborhood. The reweighted count for class y is
    w_ry = sum_s w[r, s] * (# class-y samples in polytope s).
    """
    if distance_mode not in (EUCLIDEAN, GEODESIC):
        raise InvalidInputError(f"unknown distance mode: {distance_mode!r}")
    n = data.sample_count
    if n < 2:
        raise InvalidInputError("need at least two samples to fit")
    if bias is None:
        bias = default_bias(data.feature_count)
    if bias <= 0:
        raise InvalidInputError("bias must be > 0")
    if lam <= 0:
        raise InvalidInputError("lam must be > 0")
    p = grouping.populated_count
    if grouping.polytope_ids.shape != (n,):
        raise InvalidInputError("grouping does not match the dataset")
    if weights.entries.shape != (p, p):
        raise InvalidInputError("weight matrix does not match the polytope count")
    if weights.sample_count and int(weights.sample_count) != n:
        raise InvalidInputError("weight matrix was built for a different sample count")

    poly_ids = grouping.polytope_ids
    member_counts = grouping.member_counts()
    # (p, K) raw per-polytope class counts
    raw = np.zeros((p, data.class_count), dtype=np.float64)
    np.add.at(raw, (poly_ids, data.labels), 1.0)
    weighted_counts = weights.entries @ raw
    totals = weighted_counts.sum(axis=0)

    polytopes = []
    for r in range(p):
        sample_weights = weights.entries[r, poly_ids]
        center, variance = weighted_mle_gaussian(data.features, sample_weights, lam)
        polytopes.append(
            PolytopeModel(
                center=center,
                variance_diag=variance,
                weighted_class_counts=weighted_counts[r],
                representative_signature=grouping.representative_signatures[r],
                member_count=int(member_counts[r]),
            )
        )

    return KdxModel(
        polytopes=polytopes,
        class_priors=data.priors(),
        bias=float(bias),
        sample_count=n,
        distance_mode=distance_mode,
        class_weight_totals=totals,
    )


# ---------------------------------------------------------------------------
# inference


@dataclass
class PosteriorResult:
    posteriors: np.ndarray
    predicted_class: int
    selected_polytope: int
    class_conditional_densities: np.ndarray


def _check_point(model: KdxModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    d = model.centers().shape[1]
    if x.shape != (d,):
        raise InvalidInputError(f"expected a point of dimension {d}")
    if not np.isfinite(x).all():
        raise InvalidInputError("point contains non-finite values")
    return x


def _kernel_row(model: KdxModel, signature: MembershipSignature) -> np.ndarray:
    reps = model.representative_stack()
    if model.signature_kind == FOREST:
        row = forest_kernel_matrix(signature.forest_leaves[None, :], reps)
    else:
        row = net_kernel_matrix([a[None, :] for a in signature.net_activations], reps)
    return row[0]


def _select_geodesic(model, x, signature):
    dist = 1.0 - _kernel_row(model, signature)
    best = dist.min()
    ties = np.flatnonzero(dist == best)
    if ties.shape[0] == 1:
        return int(ties[0])
    # geodesic ties: nearer Euclidean center wins, then the lowest id
    euclid = np.linalg.norm(model.centers()[ties] - x, axis=1)
    return int(ties[np.argmin(euclid)])


def polytope_distance(
    model: KdxModel, x, r: int, signature: MembershipSignature | None = None
) -> float:
    """Distance from x to polytope r under the model's distance mode."""
    x = _check_point(model, x)
    if not 0 <= r < model.populated_count:
        raise InvalidInputError(f"polytope index {r} out of range")
    if model.distance_mode == EUCLIDEAN:
        return float(np.linalg.norm(model.polytopes[r].center - x))
    if signature is None:
        raise InvalidInputError("geodesic distance requires the point's signature")
    return float(1.0 - _kernel_row(model, signature)[r])


def select_polytope(model: KdxModel, x, signature: MembershipSignature | None = None) -> int:
    """Index of the nearest polytope kernel (lowest id on exact ties)."""
    x = _check_point(model, x)
    if model.distance_mode == EUCLIDEAN:
        dist = np.linalg.norm(model.centers() - x, axis=1)
        return int(np.argmin(dist))
    if signature is None:
        raise InvalidInputError("geodesic selection requires the point's signature")
    return _select_geodesic(model, x, signature)


def _log_gaussian(x, center, variance) -> float:
    dev = x - center
    return float(-0.5 * np.sum(dev * dev / variance + np.log(variance) + _LOG_2PI))


def class_conditional_density(
    model: KdxModel, x, signature: MembershipSignature | None = None
) -> np.ndarray:
    """Per-class density from the single nearest kernel (before the bias floor)."""
    x = _check_point(model, x)
    r = select_polytope(model, x, signature)
    log_g = _log_gaussian(x, model.centers()[r], model.variances()[r])
    with np.errstate(over="ignore"):
        return model.count_ratios()[r] * np.exp(log_g)


def posterior(
    model: KdxModel, x, signature: MembershipSignature | None = None
) -> PosteriorResult:
    """Posterior over classes at x via Bayes rule on the bias-floored densities."""
    x = _check_point(model, x)
    r = select_polytope(model, x, signature)
    log_g = _log_gaussian(x, model.centers()[r], model.variances()[r])
    ratios = model.count_ratios()[r]
    bias_term = model.bias / math.log(model.sample_count)
    priors = model.class_priors

    if log_g <= _LOG_HUGE:
        density = ratios * math.exp(log_g) + bias_term
    else:
        # density dwarfs the bias floor; normalize by the Gaussian value
        density = ratios + bias_term * math.exp(-log_g)
        scores = density * priors
        g = scores / scores.sum()
        with np.errstate(over="ignore"):
            reported = ratios * math.exp(log_g) + bias_term
        return PosteriorResult(g, int(np.argmax(g)), r, reported)

    scores = density * priors
    total = scores.sum()
    if total <= 0.0:
        # bias underflowed and the kernel is numerically zero: the limit
        # of Bayes rule as the floor vanishes is the prior itself
        g = priors / priors.sum()
    else:
        g = scores / total
    return PosteriorResult(g, int(np.argmax(g)), r, density)


def predict_posteriors(
    model: KdxModel,
    X,
    signatures: list[MembershipSignature] | None = None,
    chunk: int = 256,
):
    """Batch posteriors: (n, K) matrix plus argmax labels.

    Geodesic mode needs one signature per row of X, computed against the
    same parent model the KDX was fitted from.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.centers().shape[1]:
        raise InvalidInputError("X must be (n, d) with the model's feature dimension")
    if not np.isfinite(X).all():
        raise InvalidInputError("X contains non-finite values")
    n = X.shape[0]
    if model.distance_mode == GEODESIC:
        if signatures is None or len(signatures) != n:
            raise InvalidInputError("geodesic mode requires one signature per query point")

    centers = model.centers()
    variances = model.variances()
    selected = np.empty(n, dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = X[start:stop]
        if model.distance_mode == EUCLIDEAN:
            diff = block[:, None, :] - centers[None, :, :]
            dist = np.einsum("ipd,ipd->ip", diff, diff)
            selected[start:stop] = np.argmin(dist, axis=1)
        else:
            reps = model.representative_stack()
            sigs = signatures[start:stop]
            if model.signature_kind == FOREST:
                kmat = forest_kernel_matrix(stack_forest_leaves(sigs), reps)
            else:
                kmat = net_kernel_matrix(stack_net_bits(sigs), reps)
            dist = 1.0 - kmat
            best = dist.min(axis=1, keepdims=True)
            for i in range(block.shape[0]):
                ties = np.flatnonzero(dist[i] == best[i])
                if ties.shape[0] == 1:
                    selected[start + i] = ties[0]
                else:
                    euclid = np.linalg.norm(centers[ties] - block[i], axis=1)
                    selected[start + i] = ties[np.argmin(euclid)]

    sel_centers = centers[selected]
    sel_vars = variances[selected]
    dev = X - sel_centers
    log_g = -0.5 * np.sum(dev * dev / sel_vars + np.log(sel_vars) + _LOG_2PI, axis=1)
    ratios = model.count_ratios()[selected]
    bias_term = model.bias / math.log(model.sample_count)
    priors = model.class_priors

    posteriors = np.empty((n, model.class_count))
    small = log_g <= _LOG_HUGE
    if small.any():
        dens = ratios[small] * np.exp(log_g[small])[:, None] + bias_term
        scores = dens * priors
        totals = scores.sum(axis=1)
        ok = totals > 0
        posteriors[np.flatnonzero(small)[ok]] = scores[ok] / totals[ok, None]
        if (~ok).any():
            posteriors[np.flatnonzero(small)[~ok]] = priors / priors.sum()
    if (~small).any():
        dens = ratios[~small] + bias_term * np.exp(-log_g[~small])[:, None]
        scores = dens * priors
        posteriors[~small] = scores / scores.sum(axis=1, keepdims=True)

    return posteriors, np.argmax(posteriors, axis=1)


# ---------------------------------------------------------------------------
# one-call pipelines from a trained partition learner


def fit_kdf(
    data: Dataset,
    forest,
    k: float = 1.0,
    lam: float = 1e-6,
    bias: float | None = None,
    distance_mode: str = GEODESIC,
) -> KdxModel:
    """Kernel density forest: group by leaf signatures, weight, fit."""
    return _fit_from_parent(data, forest, k, lam, bias, distance_mode)


def fit_kdn(
    data: Dataset,
    net,
    k: float = 1.0,
    lam: float = 1e-6,
    bias: float | None = None,
    distance_mode: str = GEODESIC,
) -> KdxModel:
    """Kernel density network: group by activation signatures, weight, fit."""
    return _fit_from_parent(data, net, k, lam, bias, distance_mode)


def _fit_from_parent(data, parent, k, lam, bias, distance_mode):
    grouping = group_polytopes(parent.signatures(data.features))
    kmat = representative_kernel_matrix(grouping)
    weights = exponentiate_weights(kmat, data.sample_count, k)
    return fit_kdx(data, grouping, weights, lam=lam, bias=bias, distance_mode=distance_mode)
