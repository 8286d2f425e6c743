"""Synthetic benchmark generators, their true-posterior oracles, and the
out-of-distribution sampling utilities used by the experiment protocols.

All generators are deterministic per seed. Noise arguments follow the
recipes' N(mean, variance) convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import gaussian_filter

from .data import Dataset
from .errors import InvalidInputError

KINDS = ("xor", "spiral", "circle", "sinewave", "polynomial", "trunk")
ANALYTIC_KINDS = ("xor", "trunk")

_XOR_STD = 0.25
_SPIRAL_ANGLE_VAR = 0.09
_CIRCLE_RADIUS_VAR = 0.01
_CURVE_Y_VAR = 0.01
_MIN_NUMERIC_DRAWS = 10_000


@dataclass(frozen=True)
class SimulationSpec:
    """Which generator to run and with what shape parameters.

    dimension applies to trunk only (others are 2-D); turns and
    class_count apply to spiral only.
    """

    kind: str
    n: int
    dimension: int = 2
    turns: float = 2.5
    class_count: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown simulation kind: {self.kind!r}")
        if self.n < 2:
            raise InvalidInputError("n must be >= 2")
        if self.kind == "trunk":
            if self.dimension < 1:
                raise InvalidInputError("trunk dimension must be >= 1")
        elif self.dimension != 2:
            raise InvalidInputError(f"{self.kind} is a 2-D simulation")
        if self.kind == "spiral":
            if self.turns <= 0:
                raise InvalidInputError("spiral turns must be > 0")
            if self.class_count < 2:
                raise InvalidInputError("spiral needs at least 2 classes")
        elif self.class_count != 2:
            raise InvalidInputError(f"{self.kind} is a binary simulation")


def generate(spec: SimulationSpec) -> Dataset:
    if spec.kind == "xor":
        return gen_xor(spec.n, spec.seed)
    if spec.kind == "spiral":
        return gen_spiral(spec.n, spec.class_count, spec.turns, spec.seed)
    if spec.kind == "circle":
        return gen_circle(spec.n, spec.seed)
    if spec.kind == "sinewave":
        return gen_sinewave(spec.n, spec.seed)
    if spec.kind == "polynomial":
        return gen_polynomial(spec.n, spec.seed)
    return gen_trunk(spec.n, spec.dimension, spec.seed)


def _xor_centers():
    class0 = np.array([[0.5, 0.5], [-0.5, -0.5]])
    class1 = np.array([[0.5, -0.5], [-0.5, 0.5]])
    return class0, class1


def gen_xor(n: int, seed: int = 0) -> Dataset:
    """Two-class Gaussian XOR: each class is a two-component mixture on
    opposite corners, isotropic std 0.25, equal priors."""
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    signs = rng.integers(0, 2, size=n) * 2 - 1
    class0, class1 = _xor_centers()
    base = np.where(labels[:, None] == 0, class0[0], class1[0])
    points = signs[:, None] * base + rng.normal(0.0, _XOR_STD, size=(n, 2))
    return Dataset(points, labels, 2)


def gen_spiral(n: int, class_count: int = 2, turns: float = 2.5, seed: int = 0) -> Dataset:
    """Interleaved spiral arms: per class, radii are sorted uniforms paired
    with evenly spaced angles over that class's angular span, plus Gaussian
    angle noise of variance 0.09."""
    if class_count < 2:
        raise InvalidInputError("spiral needs at least 2 classes")
    if n < class_count:
        raise InvalidInputError("n must be >= class_count")
    if turns <= 0:
        raise InvalidInputError("turns must be > 0")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, np.full(class_count, 1.0 / class_count))
    pts, labels = [], []
    span = 4.0 * math.pi * turns / class_count
    for k, m in enumerate(counts):
        if m == 0:
            continue
        r = np.sort(rng.uniform(0.0, 1.0, size=m))
        theta = np.linspace(k * span, (k + 1) * span, m)
        theta = theta + rng.normal(0.0, math.sqrt(_SPIRAL_ANGLE_VAR), size=m)
        pts.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
        labels.append(np.full(m, k, dtype=np.int64))
    points = np.vstack(pts)
    labels = np.concatenate(labels)
    order = rng.permutation(points.shape[0])
    return Dataset(points[order], labels[order], class_count)


def gen_circle(n: int, seed: int = 0) -> Dataset:
    """Concentric circles of radius 0.75 (class 0) and 1.0 (class 1) with
    radius noise of variance 0.01 and uniform angles."""
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    radius = np.where(labels == 0, 0.75, 1.0) + rng.normal(
        0.0, math.sqrt(_CIRCLE_RADIUS_VAR), size=n
    )
    points = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    return Dataset(points, labels, 2)


def _gen_curves(n, seed, f0, f1):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    x = rng.uniform(-1.0, 1.0, size=n)
    y = np.where(labels == 0, f0(x), f1(x)) + rng.normal(
        0.0, math.sqrt(_CURVE_Y_VAR), size=n
    )
    return Dataset(np.column_stack([x, y]), labels, 2)


def gen_sinewave(n: int, seed: int = 0) -> Dataset:
    """y = cos(pi x) for class 0 versus y = sin(pi x) for class 1, noise var 0.01."""
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    return _gen_curves(n, seed, lambda x: np.cos(np.pi * x), lambda x: np.sin(np.pi * x))


def gen_polynomial(n: int, seed: int = 0) -> Dataset:
    """y = x for class 0 versus y = x^3 for class 1, noise var 0.01."""
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    return _gen_curves(n, seed, lambda x: x, lambda x: x**3)


def trunk_mean(dimension: int) -> np.ndarray:
    """Component i (1-based) is (1/i)^(1/2); discriminability fades with i."""
    return 1.0 / np.sqrt(np.arange(1, dimension + 1, dtype=np.float64))


def gen_trunk(n: int, dimension: int, seed: int = 0) -> Dataset:
    """Two unit-covariance Gaussians at +mu (class 0) and -mu (class 1)."""
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    if dimension < 1:
        raise InvalidInputError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    mu = trunk_mean(dimension)
    signs = np.where(labels == 0, 1.0, -1.0)
    points = signs[:, None] * mu + rng.standard_normal((n, dimension))
    return Dataset(points, labels, 2)


# ---------------------------------------------------------------------------
# true posteriors


def _log_normal_pdf(X, mean, std):
    dev = (X - mean) / std
    return -0.5 * np.sum(dev * dev, axis=1) - X.shape[1] * (
        math.log(std) + 0.5 * math.log(2.0 * math.pi)
    )


def _xor_posterior(X):
    class0, class1 = _xor_centers()
    logs = []
    for centers in (class0, class1):
        comp = np.stack(
            [_log_normal_pdf(X, centers[0], _XOR_STD), _log_normal_pdf(X, centers[1], _XOR_STD)]
        )
        m = comp.max(axis=0)
        logs.append(m + np.log(0.5 * np.exp(comp - m).sum(axis=0)))
    l0, l1 = logs
    p0 = 1.0 / (1.0 + np.exp(l1 - l0))
    return np.column_stack([p0, 1.0 - p0])


def _trunk_posterior(X, dimension):
    mu = trunk_mean(dimension)
    # log N(x; +mu, I) - log N(x; -mu, I) = 2 x . mu
    margin = 2.0 * X @ mu
    p0 = 1.0 / (1.0 + np.exp(-margin))
    return np.column_stack([p0, 1.0 - p0])


@lru_cache(maxsize=8)
def _numeric_oracle(spec: SimulationSpec, draws: int, grid_size: int):
    """Monte Carlo class-conditional densities on a smoothed 2-D grid."""
    sample_spec = SimulationSpec(
        kind=spec.kind,
        n=draws,
        dimension=spec.dimension,
        turns=spec.turns,
        class_count=spec.class_count,
        seed=spec.seed,
    )
    data = generate(sample_spec)
    lo = data.features.min(axis=0) - 0.1
    hi = data.features.max(axis=0) + 0.1
    edges = [np.linspace(lo[j], hi[j], grid_size + 1) for j in range(2)]
    densities = []
    priors = data.priors()
    for y in range(data.class_count):
        pts = data.features[data.labels == y]
        hist, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=edges)
        hist = gaussian_filter(hist, sigma=2.0)
        cell = (hi - lo) / grid_size
        total = hist.sum() * cell[0] * cell[1]
        densities.append(hist / total if total > 0 else hist)
    return np.stack(densities), priors, lo, hi


def _numeric_posterior(spec, X, draws, grid_size):
    dens, priors, lo, hi = _numeric_oracle(spec, draws, grid_size)
    idx = np.clip(
        ((X - lo) / (hi - lo) * grid_size).astype(int), 0, grid_size - 1
    )
    vals = dens[:, idx[:, 0], idx[:, 1]].T * priors
    totals = vals.sum(axis=1, keepdims=True)
    out = np.where(totals > 0, vals / np.where(totals > 0, totals, 1.0), priors)
    return out


def true_posterior(
    spec: SimulationSpec,
    X,
    mode: str = "analytic",
    draws: int = 1_000_000,
    grid_size: int = 200,
) -> np.ndarray:
    """Generator-truth class posteriors at the query points.

    Analytic mode covers xor and trunk exactly; numeric mode estimates
    any 2-D recipe from Monte Carlo draws smoothed on a grid.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if mode == "analytic":
        if spec.kind == "xor":
            return _xor_posterior(X)
        if spec.kind == "trunk":
            return _trunk_posterior(X, spec.dimension)
        raise InvalidInputError(f"no analytic posterior for kind {spec.kind!r}")
    if mode == "numeric":
        if draws < _MIN_NUMERIC_DRAWS:
            raise InvalidInputError(f"numeric mode needs >= {_MIN_NUMERIC_DRAWS} draws")
        if spec.kind == "trunk" and spec.dimension != 2:
            raise InvalidInputError("numeric mode supports 2-D simulations only")
        return _numeric_posterior(spec, X, draws, grid_size)
    raise InvalidInputError(f"unknown posterior mode: {mode!r}")


# ---------------------------------------------------------------------------
# OOD sampling and normalization


def sample_hypersphere(dimension: int, radius: float, count: int, seed: int = 0) -> np.ndarray:
    """Points uniform on the (d-1)-sphere surface of the given radius."""
    if radius <= 0:
        raise InvalidInputError("radius must be > 0")
    if dimension < 1 or count < 1:
        raise InvalidInputError("dimension and count must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, dimension))
    norms = np.linalg.norm(g, axis=1)
    while (norms == 0).any():  # probability-zero guard
        bad = norms == 0
        g[bad] = rng.standard_normal((int(bad.sum()), dimension))
        norms = np.linalg.norm(g, axis=1)
    return radius * g / norms[:, None]


def normalize_max_l2(data: Dataset) -> tuple[Dataset, float]:
    """Divide all points by the max row l2 norm, confining them to the unit ball."""
    norms = np.linalg.norm(data.features, axis=1)
    scale = float(norms.max())
    if scale == 0.0:
        raise InvalidInputError("cannot normalize all-zero data")
    return Dataset(data.features / scale, data.labels, data.class_count), scale
