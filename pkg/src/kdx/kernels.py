"""Similarity kernels between membership signatures and derived machinery.

The forest kernel is the fraction of trees in which two points share a
leaf; the net kernel is the fraction of activation paths (one node per
hidden layer) that are identically activated, computed as the product
of per-layer agreement fractions. Both sit in [0, 1] and hit 1 exactly
on identical signatures, so 1 - K is a metric over polytopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import InvalidInputError
from .signatures import FOREST, NET, MembershipSignature

# ---------------------------------------------------------------------------
# pairwise kernels


def _check_forest_pair(a: MembershipSignature, b: MembershipSignature):
    if a.kind != FOREST or b.kind != FOREST:
        raise InvalidInputError("both signatures must be forest-kind")
    if a.tree_count != b.tree_count:
        raise InvalidInputError("signatures come from forests with different tree counts")


def _check_net_pair(a: MembershipSignature, b: MembershipSignature):
    if a.kind != NET or b.kind != NET:
        raise InvalidInputError("both signatures must be net-kind")
    if a.layer_widths != b.layer_widths:
        raise InvalidInputError("signatures come from nets with different architectures")


def forest_match_count(a: MembershipSignature, b: MembershipSignature) -> int:
    """Number of trees in which both points land in the same leaf (exact integer)."""
    _check_forest_pair(a, b)
    return int(np.count_nonzero(a.forest_leaves == b.forest_leaves))


def forest_kernel(a: MembershipSignature, b: MembershipSignature) -> float:
    return forest_match_count(a, b) / a.tree_count


def net_layer_agreements(a: MembershipSignature, b: MembershipSignature) -> list[int]:
    """Per-layer count of hidden nodes with equal activation bits."""
    _check_net_pair(a, b)
    return [
        int(np.count_nonzero(la == lb))
        for la, lb in zip(a.net_activations, b.net_activations)
    ]


def net_agreeing_path_count(a: MembershipSignature, b: MembershipSignature) -> tuple[int, int]:
    """(identically activated paths, total paths) as exact integers.

    A path picks one node per hidden layer and is identically activated
    iff every picked node agrees, so the count is the product of
    per-layer agreement counts.
    """
    agreements = net_layer_agreements(a, b)
    return math.prod(agreements), math.prod(a.layer_widths)


def net_kernel(a: MembershipSignature, b: MembershipSignature) -> float:
    agreements = net_layer_agreements(a, b)
    value = 1.0
    for m, w in zip(agreements, a.layer_widths):
        value *= m / w
    return value


def kernel_value(a: MembershipSignature, b: MembershipSignature) -> float:
    if a.kind != b.kind:
        raise InvalidInputError("cannot compare signatures of different kinds")
    return forest_kernel(a, b) if a.kind == FOREST else net_kernel(a, b)


def geodesic_distance(a: MembershipSignature, b: MembershipSignature) -> float:
    """d(a, b) = 1 - K(a, b); zero iff the signatures are identical."""
    return 1.0 - kernel_value(a, b)


# ---------------------------------------------------------------------------
# batched kernels over stacked signatures


def stack_forest_leaves(signatures) -> np.ndarray:
    return np.vstack([s.forest_leaves for s in signatures])


def stack_net_bits(signatures) -> list[np.ndarray]:
    widths = signatures[0].layer_widths
    for s in signatures:
        if s.layer_widths != widths:
            raise InvalidInputError("signatures come from nets with different architectures")
    return [
        np.vstack([s.net_activations[layer] for s in signatures])
        for layer in range(len(widths))
    ]


def forest_kernel_matrix(leaves_a: np.ndarray, leaves_b: np.ndarray) -> np.ndarray:
    """(m, p) kernel matrix from (m, T) and (p, T) leaf-id matrices."""
    if leaves_a.shape[1] != leaves_b.shape[1]:
        raise InvalidInputError("leaf matrices disagree on tree count")
    T = leaves_a.shape[1]
    counts = np.zeros((leaves_a.shape[0], leaves_b.shape[0]), dtype=np.int32)
    for t in range(T):
        counts += leaves_a[:, t, None] == leaves_b[None, :, t]
    return counts / T


def net_kernel_matrix(bits_a: list[np.ndarray], bits_b: list[np.ndarray]) -> np.ndarray:
    """(m, p) kernel matrix from per-layer (m, w_l) and (p, w_l) bit matrices."""
    if len(bits_a) != len(bits_b):
        raise InvalidInputError("bit matrices disagree on layer count")
    out = None
    for la, lb in zip(bits_a, bits_b):
        if la.shape[1] != lb.shape[1]:
            raise InvalidInputError("bit matrices disagree on a layer width")
        A = la.astype(np.float64)
        B = lb.astype(np.float64)
        agree = A @ B.T + (1.0 - A) @ (1.0 - B).T  # exact small-integer arithmetic
        frac = agree / la.shape[1]
        out = frac if out is None else out * frac
    return out


def signature_kernel_matrix(sigs_a, sigs_b) -> np.ndarray:
    """Kernel matrix between two signature collections of a common kind."""
    if not sigs_a or not sigs_b:
        raise InvalidInputError("signature collections must be non-empty")
    kind = sigs_a[0].kind
    if any(s.kind != kind for s in sigs_a) or any(s.kind != kind for s in sigs_b):
        raise InvalidInputError("signature collections mix kinds")
    if kind == FOREST:
        return forest_kernel_matrix(stack_forest_leaves(sigs_a), stack_forest_leaves(sigs_b))
    return net_kernel_matrix(stack_net_bits(sigs_a), stack_net_bits(sigs_b))


# ---------------------------------------------------------------------------
# grouping samples into populated polytopes


@dataclass(frozen=True)
class PolytopeGrouping:
    """Exact-signature partition of a sample set.

    Two samples share a polytope id iff their signatures are identical
    (equivalently, iff their kernel value is exactly 1).
    """

    polytope_ids: np.ndarray
    representative_signatures: tuple[MembershipSignature, ...]
    populated_count: int

    def member_counts(self) -> np.ndarray:
        return np.bincount(self.polytope_ids, minlength=self.populated_count)


def group_polytopes(signatures) -> PolytopeGrouping:
    signatures = list(signatures)
    if not signatures:
        raise InvalidInputError("cannot group an empty signature list")
    kind = signatures[0].kind
    if any(s.kind != kind for s in signatures):
        raise InvalidInputError("cannot group signatures of mixed kinds")
    ids = np.empty(len(signatures), dtype=np.int64)
    reps: list[MembershipSignature] = []
    seen: dict[bytes, int] = {}
    for i, sig in enumerate(signatures):
        k = sig.key()
        pid = seen.get(k)
        if pid is None:
            pid = len(reps)
            seen[k] = pid
            reps.append(sig)
        ids[i] = pid
    return PolytopeGrouping(
        polytope_ids=ids,
        representative_signatures=tuple(reps),
        populated_count=len(reps),
    )


def representative_kernel_matrix(grouping: PolytopeGrouping) -> np.ndarray:
    return signature_kernel_matrix(
        grouping.representative_signatures, grouping.representative_signatures
    )


# ---------------------------------------------------------------------------
# weight exponentiation


@dataclass(frozen=True)
class WeightMatrix:
    """Pairwise polytope weights w = K^(k ln n); symmetric with unit diagonal."""

    entries: np.ndarray
    exponent_scale: float
    sample_count: float

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise InvalidInputError("weight entries must form a square matrix")
        if (e < 0).any() or (e > 1).any():
            raise InvalidInputError("weight entries must lie in [0, 1]")
        if not np.array_equal(e, e.T):
            raise InvalidInputError("weight matrix must be symmetric")
        if not (np.diag(e) == 1.0).all():
            raise InvalidInputError("weight matrix diagonal must be all ones")
        object.__setattr__(self, "entries", e)


def exponentiate_weights(kernels: np.ndarray, n: float, k: float) -> WeightMatrix:
    """Entrywise K^(k ln n). Identical polytopes keep weight 1; any K < 1
    decays toward 0 as n grows, which is what makes the reweighted counts
    consistent."""
    kernels = np.asarray(kernels, dtype=np.float64)
    if (kernels < 0).any() or (kernels > 1).any():
        raise InvalidInputError("kernel entries must lie in [0, 1]")
    if n < 2:
        raise InvalidInputError("sample count must be >= 2 (log n must be positive)")
    if k <= 0:
        raise InvalidInputError("exponent scale k must be > 0")
    entries = kernels ** (k * math.log(n))
    return WeightMatrix(entries=entries, exponent_scale=float(k), sample_count=float(n))


# ---------------------------------------------------------------------------
# grid search for the exponent scale


def grid_search_k(fit_data: Dataset, holdout_data: Dataset, candidate_ks, fit_fn) -> float:
    """Pick the candidate whose fitted model has the lowest hold-out error.

    fit_fn(fit_data, k) must return a callable mapping a feature matrix
    to predicted labels. Ties go to the smaller k.
    """
    candidates = sorted(float(k) for k in candidate_ks)
    if not candidates:
        raise InvalidInputError("candidate list must be non-empty")
    best_k, best_err = None, np.inf
    for k in candidates:
        predict = fit_fn(fit_data, k)
        pred = np.asarray(predict(holdout_data.features))
        err = float(np.mean(pred != holdout_data.labels))
        if err < best_err:
            best_k, best_err = k, err
    return best_k


def select_grid_k(
    data: Dataset, candidate_ks, fit_fn, holdout_fraction: float = 0.2, seed: int = 0
) -> float:
    """Split data, then grid-search the weight exponent scale on the hold-out part."""
    if not list(candidate_ks):
        raise InvalidInputError("candidate list must be non-empty")
    if not 0.0 < holdout_fraction < 1.0:
        raise InvalidInputError("holdout_fraction must be in (0, 1)")
    n = data.sample_count
    n_hold = max(1, round(holdout_fraction * n))
    if n_hold >= n:
        raise InvalidInputError("dataset too small to split for grid search")
    perm = np.random.default_rng(seed).permutation(n)
    hold, fit = perm[:n_hold], perm[n_hold:]
    return grid_search_k(data.subset(fit), data.subset(hold), candidate_ks, fit_fn)
