"""Reproducible experiment protocols and structured result emission.

Every run is fully determined by (config, master seed): repetition seeds
are spawned from a numpy SeedSequence rooted at the master seed, one
child per (cell, repetition), and each child spawns fixed sub-streams
for data generation, splitting, parent training, test draws, and OOD
sampling.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .data import Dataset, load_csv
from .density import (
    EUCLIDEAN,
    GEODESIC,
    default_bias,
    fit_kdx,
    predict_posteriors,
)
from .errors import ConfigError, InvalidInputError
from .forest import ForestConfig, train_forest
from .kernels import exponentiate_weights, group_polytopes, representative_kernel_matrix
from .metrics import (
    classification_error,
    improvement,
    mce,
    mean_hellinger,
    mean_max_confidence,
    oce,
)
from .model_io import write_json_atomic
from .network import NetConfig, train_relu_net
from .simulations import (
    ANALYTIC_KINDS,
    SimulationSpec,
    generate,
    normalize_max_l2,
    sample_hypersphere,
    true_posterior,
)

REPORT_SCHEMA_VERSION = 1
METHODS = ("rf", "kdf", "dn", "kdn")
PARENT_OF = {"rf": "rf", "kdf": "rf", "dn": "dn", "kdn": "dn"}
SEED_DERIVATION = (
    "numpy SeedSequence(master_seed).spawn(cells * repetitions); "
    "child index = cell_index * repetitions + repetition; each child spawns "
    "sub-streams (data, split, parents, test, ood) in that order"
)

CSV_COLUMNS = (
    "method",
    "dataset",
    "n",
    "d",
    "radius",
    "repetition",
    "classification_error",
    "hellinger",
    "mean_max_confidence",
    "mce",
    "oce",
    "bin_count",
)


@dataclass
class ExperimentConfig:
    methods: tuple[str, ...] = ("rf", "kdf")
    simulation: SimulationSpec | None = None
    csv_path: str | None = None
    sample_sizes: tuple[int, ...] = (1000,)
    dimensions: tuple[int, ...] = ()  # trunk sweep only
    ood_radii: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0)
    repetitions: int = 5
    fit_fraction: float = 0.9
    k_grid: tuple[float, ...] = (1e-3, 1e-2, 1e-1, 1.0)
    distance_mode: str = GEODESIC
    seed: int = 0
    forest: ForestConfig = field(default_factory=ForestConfig.desk)
    net: NetConfig = field(default_factory=NetConfig.desk)
    lam: float = 1e-6
    test_size: int = 1000
    ood_sample_count: int = 1000
    calibration_bins: int = 15
    hellinger_oracle: str = "analytic"  # analytic | numeric | off
    test_fraction: float = 0.3  # tabular held-out share

    def validate(self):
        if not self.methods:
            raise ConfigError("at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method: {m!r}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("duplicate methods")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not 0.0 < self.fit_fraction < 1.0:
            raise ConfigError("fit_fraction must be in (0, 1)")
        if not self.ood_radii or any(r <= 0 for r in self.ood_radii):
            raise ConfigError("ood_radii must be positive")
        if list(self.ood_radii) != sorted(self.ood_radii):
            raise ConfigError("ood_radii must be ascending")
        if not self.k_grid or any(k <= 0 for k in self.k_grid):
            raise ConfigError("k_grid must be non-empty and positive")
        if self.distance_mode not in (EUCLIDEAN, GEODESIC):
            raise ConfigError(f"unknown distance_mode: {self.distance_mode!r}")
        if self.calibration_bins < 1 or self.test_size < 1 or self.ood_sample_count < 1:
            raise ConfigError("bins, test_size and ood_sample_count must be >= 1")
        if self.hellinger_oracle not in ("analytic", "numeric", "off"):
            raise ConfigError(f"unknown hellinger_oracle: {self.hellinger_oracle!r}")
        if any(n < 3 for n in self.sample_sizes):
            raise ConfigError("sample sizes must be >= 3 to allow a fit/calibrate split")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.lam <= 0:
            raise ConfigError("lam must be > 0")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("methods", "sample_sizes", "dimensions", "ood_radii", "k_grid"):
            d[key] = list(d[key])
        if d["simulation"] is not None:
            d["simulation"] = dataclasses.asdict(self.simulation)
        d["net"]["hidden_widths"] = list(self.net.hidden_widths)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = dict(raw)
        for key in ("methods", "sample_sizes", "dimensions", "ood_radii", "k_grid"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        for key, sub_cls in (("simulation", SimulationSpec), ("forest", ForestConfig), ("net", NetConfig)):
            if isinstance(kwargs.get(key), dict):
                sub_known = {f.name for f in dataclasses.fields(sub_cls)}
                sub_unknown = sorted(set(kwargs[key]) - sub_known)
                if sub_unknown:
                    raise ConfigError(f"unknown {key} keys: {', '.join(sub_unknown)}")
                sub = dict(kwargs[key])
                if key == "net" and "hidden_widths" in sub:
                    sub["hidden_widths"] = tuple(sub["hidden_widths"])
                kwargs[key] = sub_cls(**sub)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ExperimentReport:
    schema_version: int
    software_version: str
    kind: str
    config: dict
    seed_derivation: str
    seeds: list[dict]
    rows: list[dict]
    summaries: list[dict]
    improvements: list[dict]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(**d)


def _seed_int(seed_seq) -> int:
    return int(seed_seq.generate_state(1)[0])


def _row_sort_key(row):
    radius = row["radius"]
    return (
        row["method"],
        row["n"],
        row["d"],
        (0, 0.0) if radius is None else (1, radius),
        row["repetition"],
    )


def _make_row(method, dataset, n, d, radius, repetition, **stats):
    row = {
        "method": method,
        "dataset": dataset,
        "n": n,
        "d": d,
        "radius": radius,
        "repetition": repetition,
        "classification_error": None,
        "hellinger": None,
        "mean_max_confidence": None,
        "mce": None,
        "oce": None,
        "bin_count": None,
    }
    row.update(stats)
    return row


# ---------------------------------------------------------------------------
# model fitting per cell


def _fit_cell_models(config: ExperimentConfig, fit_ds: Dataset, cal_ds: Dataset, parent_seeds):
    """Train the requested parents and KDX variants; return posterior closures."""
    forest_seed, net_seed = parent_seeds
    geodesic = config.distance_mode == GEODESIC
    fns = {}
    if {"rf", "kdf"} & set(config.methods):
        forest = train_forest(fit_ds, config.forest, seed=forest_seed)
        fns["rf"] = forest.predict_proba
        if "kdf" in config.methods:
            kdf_model, _ = _grid_fit_kdx(config, fit_ds, cal_ds, forest)
            fns["kdf"] = _kdx_posterior_fn(kdf_model, forest, geodesic)
    if {"dn", "kdn"} & set(config.methods):
        net = train_relu_net(fit_ds, config.net, seed=net_seed)
        fns["dn"] = net.predict_proba
        if "kdn" in config.methods:
            kdn_model, _ = _grid_fit_kdx(config, fit_ds, cal_ds, net)
            fns["kdn"] = _kdx_posterior_fn(kdn_model, net, geodesic)
    return fns


def _kdx_posterior_fn(model, parent, geodesic):
    def fn(X):
        sigs = parent.signatures(X) if geodesic else None
        return predict_posteriors(model, X, signatures=sigs)[0]

    return fn


def _grid_fit_kdx(config: ExperimentConfig, fit_ds: Dataset, cal_ds: Dataset, parent):
    """Fit one KDX per candidate k; keep the lowest calibration error
    (ties go to the smaller k). The polytope grouping and kernel matrix
    are shared across candidates."""
    grouping = group_polytopes(parent.signatures(fit_ds.features))
    kmat = representative_kernel_matrix(grouping)
    bias = default_bias(fit_ds.feature_count)
    geodesic = config.distance_mode == GEODESIC
    cal_sigs = parent.signatures(cal_ds.features) if geodesic else None
    best = None
    for k in sorted(config.k_grid):
        weights = exponentiate_weights(kmat, fit_ds.sample_count, k)
        model = fit_kdx(
            fit_ds,
            grouping,
            weights,
            lam=config.lam,
            bias=bias,
            distance_mode=config.distance_mode,
        )
        _, pred = predict_posteriors(model, cal_ds.features, signatures=cal_sigs)
        err = classification_error(pred, cal_ds.labels)
        if best is None or err < best[0]:
            best = (err, k, model)
    return best[2], best[1]


def _fit_cal_split(config: ExperimentConfig, train: Dataset, split_seed: int):
    n = train.sample_count
    if n < 3:
        raise ConfigError("need at least 3 samples to split into fit and calibrate parts")
    n_fit = int(round(config.fit_fraction * n))
    n_fit = min(max(n_fit, 2), n - 1)
    perm = np.random.default_rng(split_seed).permutation(n)
    return train.subset(perm[:n_fit]), train.subset(perm[n_fit:])


def _cell_rows(config, dataset_name, n, d, rep, train, test, truth, cell_child):
    """Shared per-cell pipeline: normalize, split, fit, evaluate ID and OOD."""
    sub = cell_child.spawn(3)  # split, parents, ood
    train_norm, scale = normalize_max_l2(train)
    fit_ds, cal_ds = _fit_cal_split(config, train_norm, _seed_int(sub[0]))
    parent_seeds = [_seed_int(s) for s in sub[1].spawn(2)]
    fns = _fit_cell_models(config, fit_ds, cal_ds, parent_seeds)
    priors = fit_ds.priors()

    rows = []
    X_test_model = test.features / scale
    for method in config.methods:
        post = fns[method](X_test_model)
        pred = np.argmax(post, axis=1)
        stats = {
            "classification_error": classification_error(pred, test.labels),
            "mean_max_confidence": mean_max_confidence(post),
            "mce": mce(post.max(axis=1), (pred == test.labels).astype(float), config.calibration_bins),
            "bin_count": config.calibration_bins,
        }
        if truth is not None:
            stats["hellinger"] = mean_hellinger(post, truth)
        rows.append(_make_row(method, dataset_name, n, d, None, rep, **stats))

    ood_children = sub[2].spawn(len(config.ood_radii))
    for radius, ood_child in zip(config.ood_radii, ood_children):
        pts = sample_hypersphere(d, radius, config.ood_sample_count, seed=_seed_int(ood_child))
        for method in config.methods:
            post = fns[method](pts)
            rows.append(
                _make_row(
                    method,
                    dataset_name,
                    n,
                    d,
                    float(radius),
                    rep,
                    mean_max_confidence=mean_max_confidence(post),
                    oce=oce(post, priors),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# entry points


def run_simulation_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Sample-size sweep on one synthetic recipe (ID metrics + OOD radii)."""
    config.validate()
    if config.simulation is None:
        raise ConfigError("run-sim requires a simulation spec")
    spec = config.simulation
    cells = [(n, spec.dimension) for n in config.sample_sizes]
    return _run_generated(config, spec, cells, kind="run-sim")


def run_trunk_sweep(config: ExperimentConfig) -> ExperimentReport:
    """Dimension sweep on the trunk recipe at fixed sample size."""
    config.validate()
    spec = config.simulation or SimulationSpec(kind="trunk", n=5000)
    if spec.kind != "trunk":
        raise ConfigError("run-trunk requires the trunk simulation")
    dims = config.dimensions or (spec.dimension,)
    if any(d < 1 for d in dims):
        raise ConfigError("dimensions must be >= 1")
    n = config.sample_sizes[0]
    cells = [(n, d) for d in dims]
    return _run_generated(config, spec, cells, kind="run-trunk")


def _run_generated(config, spec, cells, kind):
    reps = config.repetitions
    children = np.random.SeedSequence(config.seed).spawn(len(cells) * reps)
    rows, seeds = [], []
    want_truth = config.hellinger_oracle != "off"
    for ci, (n, d) in enumerate(cells):
        for rep in range(reps):
            child = children[ci * reps + rep]
            seeds.append(
                {"cell": ci, "n": n, "d": d, "repetition": rep, "seed": _seed_int(child)}
            )
            gen_children = child.spawn(2)  # train draw, test draw
            cell_spec = replace(spec, n=n, dimension=d, seed=_seed_int(gen_children[0]))
            train = generate(cell_spec)
            test_spec = replace(spec, n=config.test_size, dimension=d, seed=_seed_int(gen_children[1]))
            test = generate(test_spec)
            truth = None
            if want_truth:
                if config.hellinger_oracle == "numeric":
                    truth = true_posterior(cell_spec, test.features, mode="numeric")
                elif spec.kind in ANALYTIC_KINDS:
                    truth = true_posterior(cell_spec, test.features)
            rows.extend(
                _cell_rows(config, spec.kind, n, d, rep, train, test, truth, child)
            )
    rows.sort(key=_row_sort_key)
    return _assemble_report(config, kind, rows, seeds, with_improvements=False)


def run_tabular_experiment(csv_path, config: ExperimentConfig) -> ExperimentReport:
    """Same pipeline on an ingested CSV; adds improvement-vs-parent statistics."""
    config.validate()
    full = load_csv(csv_path)
    dataset_name = str(csv_path)
    sizes = config.sample_sizes
    reps = config.repetitions
    children = np.random.SeedSequence(config.seed).spawn(len(sizes) * reps)
    rows, seeds = [], []
    for ci, n in enumerate(sizes):
        for rep in range(reps):
            child = children[ci * reps + rep]
            seeds.append(
                {
                    "cell": ci,
                    "n": n,
                    "d": full.feature_count,
                    "repetition": rep,
                    "seed": _seed_int(child),
                }
            )
            shuffle_child = child.spawn(1)[0]
            perm = np.random.default_rng(_seed_int(shuffle_child)).permutation(full.sample_count)
            n_test = max(1, min(config.test_size, int(config.test_fraction * full.sample_count)))
            pool = perm[n_test:]
            if n > pool.shape[0]:
                raise ConfigError(
                    f"sample size {n} exceeds the {pool.shape[0]} rows left after the test split"
                )
            train = full.subset(pool[:n])
            test = full.subset(perm[:n_test])
            rows.extend(
                _cell_rows(config, dataset_name, n, full.feature_count, rep, train, test, None, child)
            )
    rows.sort(key=_row_sort_key)
    return _assemble_report(config, "run-tabular", rows, seeds, with_improvements=True)


# ---------------------------------------------------------------------------
# aggregation and emission

_SUMMARY_METRICS = ("classification_error", "hellinger", "mean_max_confidence", "mce", "oce")
_IMPROVEMENT_METRICS = ("classification_error", "mce", "oce")


def _group_cells(rows):
    cells = {}
    for row in rows:
        key = (row["method"], row["n"], row["d"], row["radius"])
        cells.setdefault(key, []).append(row)
    return cells


def _summarize(rows):
    summaries = []
    for (method, n, d, radius), group in sorted(
        _group_cells(rows).items(), key=lambda kv: _row_sort_key(kv[1][0])
    ):
        dataset = group[0]["dataset"]
        for metric in _SUMMARY_METRICS:
            values = [r[metric] for r in group if r[metric] is not None]
            if not values:
                continue
            p25, p50, p75 = (float(v) for v in np.percentile(values, [25, 50, 75]))
            summaries.append(
                {
                    "method": method,
                    "dataset": dataset,
                    "n": n,
                    "d": d,
                    "radius": radius,
                    "metric": metric,
                    "p25": p25,
                    "p50": p50,
                    "p75": p75,
                    "repetitions": len(values),
                }
            )
    return summaries


def _improvements(rows, methods):
    """Median improvement over the parent per cell; the parent scores 0
    against itself, and a zero parent statistic leaves the entry null."""
    medians = {}
    for key, group in _group_cells(rows).items():
        method, n, d, radius = key
        for metric in _IMPROVEMENT_METRICS:
            values = [r[metric] for r in group if r[metric] is not None]
            if values:
                medians[(method, n, d, radius, metric)] = float(np.median(values))
    out = []
    for (method, n, d, radius, metric), value in sorted(
        medians.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], kv[0][3] or -1.0, kv[0][4])
    ):
        parent = PARENT_OF[method]
        if parent not in methods:
            continue
        parent_value = medians.get((parent, n, d, radius, metric))
        if parent_value is None:
            continue
        improved = None
        if parent_value != 0:
            improved = improvement(parent_value, value)
        out.append(
            {
                "method": method,
                "parent": parent,
                "n": n,
                "d": d,
                "radius": radius,
                "statistic": metric,
                "improvement": improved,
            }
        )
    return out


def _assemble_report(config, kind, rows, seeds, with_improvements):
    return ExperimentReport(
        schema_version=REPORT_SCHEMA_VERSION,
        software_version=__version__,
        kind=kind,
        config=config.to_dict(),
        seed_derivation=SEED_DERIVATION,
        seeds=seeds,
        rows=rows,
        summaries=_summarize(rows),
        improvements=_improvements(rows, config.methods) if with_improvements else [],
    )


def report_to_csv(report: ExperimentReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        cells = []
        for col in CSV_COLUMNS:
            v = row[col]
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, format: str, path) -> None:
    """Write the report atomically as JSON (lossless) or flat CSV rows."""
    if format == "json":
        write_json_atomic(report.to_json(), path)
    elif format == "csv":
        write_json_atomic(report_to_csv(report), path)
    else:
        raise InvalidInputError(f"unknown report format: {format!r}")


def load_report(path) -> ExperimentReport:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported report schema version: {doc.get('schema_version')!r}")
    return ExperimentReport.from_dict(doc)
