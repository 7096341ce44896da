"""Experiment harness: composes normalization strategies, DA methods and
classifiers over LOSO/HLSO folds, aggregates fold accuracies into the
strategy-by-method table, and emits reports plus 2-D projection data.

Every cell is a pure function of (data, method spec, derived seed), so a
rerun with one root seed reproduces report.csv byte for byte. Test labels
are consulted only when scoring: fitting receives test-side features
(unsupervised-DA contract) but never test labels.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import (
    DomainDataset,
    Fold,
    SyntheticShiftConfig,
    generate_synthetic,
    hlso_folds,
    load_csv,
    loso_folds,
    stratified_indices,
)
from .deep import (
    AddaModel,
    DannModel,
    Mlp,
    MlpSpec,
    PlainModel,
    TrainConfig,
    make_adda,
    make_dann,
    predict_composite,
    train_adda,
    train_dann,
    train_plain,
)
from .errors import ConfigError, EmptyInputError, ExperimentError, ShapeError
from .normalize import NormStrategy, apply_strategy
from .shallow import (
    KernelSpec,
    KpcaModel,
    TcaModel,
    kpca_fit,
    kpca_transform,
    tca_fit,
    tca_transform,
)
from .svm import SvmModel, svm_predict, svm_train

DEEP_METHODS = ("noDA-ANN", "DANN", "ADDA")
SHALLOW_METHODS = ("noDA-SVM", "TCA-SVM", "KPCA-SVM")
METHOD_ORDER = DEEP_METHODS + SHALLOW_METHODS
STRATEGY_ORDER = ("noNorm", "Z0", "Z1", "Z2", "Z3", "MinMax")
ARCH_KEYS = ("hidden", "feature_dim", "activation")


@dataclass(frozen=True)
class MethodSpec:
    """One column of the benchmark table plus its hyperparameters.

    `kernel` drives the TCA/KPCA projection (and the SVM itself for
    noDA-SVM); `svm_kernel` is the downstream classifier kernel once data
    has been projected. `hidden`/`feature_dim`/`activation` shape the
    network components of the deep methods.
    """

    kind: str
    kernel: KernelSpec = KernelSpec("linear")
    svm_kernel: KernelSpec = KernelSpec("linear")
    dim: int = 2
    mu_reg: float = 1.0
    C: float = 1.0
    svm_tol: float = 1e-3
    svm_max_passes: int = 20
    hidden: tuple[int, ...] = (16,)
    feature_dim: int = 8
    activation: str = "relu"
    lam: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.kind not in METHOD_ORDER:
            raise ConfigError(f"unknown method kind {self.kind!r}; expected one of {METHOD_ORDER}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: SyntheticShiftConfig | str
    protocol: str = "loso"
    strategies: tuple[NormStrategy, ...] = (NormStrategy.NO_NORM, NormStrategy.Z2)
    methods: tuple[MethodSpec, ...] = (MethodSpec("noDA-SVM"),)
    grids: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "report"
    emit_projections: bool = False

    def __post_init__(self):
        if self.protocol not in ("loso", "hlso"):
            raise ConfigError(f"protocol must be 'loso' or 'hlso', got {self.protocol!r}")
        if not self.strategies or not self.methods:
            raise ConfigError("strategies and methods must be nonempty")
        names = [m.kind for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate method kinds in config")
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass(frozen=True)
class CellResult:
    strategy: str
    method: str
    fold_names: tuple[str, ...]
    accuracies: tuple[float, ...] | None
    error: str | None
    seconds: float

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def mean(self) -> float | None:
        return float(np.mean(self.accuracies)) if self.ok else None

    @property
    def std(self) -> float | None:
        return float(np.std(self.accuracies, ddof=0)) if self.ok else None


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    fold_names: tuple[str, ...]
    cells: tuple[CellResult, ...]

    def cell(self, strategy: str, method: str) -> CellResult:
        for c in self.cells:
            if c.strategy == strategy and c.method == method:
                return c
        raise KeyError((strategy, method))


def accuracy(predicted, actual) -> float:
    """Fraction of exact label matches."""
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ShapeError("predicted and actual label vectors differ in length")
    if predicted.size == 0:
        raise EmptyInputError("cannot score empty label vectors")
    return float(np.mean(predicted == actual))


def aggregate(accuracies) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation over folds."""
    accs = np.asarray(accuracies, dtype=np.float64)
    if accs.size == 0:
        raise EmptyInputError("aggregate needs at least one fold")
    return float(accs.mean()), float(accs.std(ddof=0))


def format_cell(mean: float, std: float) -> str:
    """Render fractions as 'MM.MM (SS.SS)' percent, round half to even."""
    return f"{mean * 100:.2f} ({std * 100:.2f})"


def derive_seed(root: int, *parts) -> int:
    """Stable per-job seed from the root seed and job coordinates."""
    text = "|".join([str(root)] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def deap_valence_labels(ratings) -> np.ndarray:
    """Discretize valence ratings: <3 negative (0), 3..7 open neutral (1),
    >7 positive (2); ratings exactly 3 or 7 are unassigned and rejected."""
    out = np.empty(len(ratings), dtype=np.int64)
    for i, r in enumerate(ratings):
        r = float(r)
        if not 1.0 <= r <= 9.0:
            raise ValueError(f"rating {r} outside the 1..9 scale")
        if r == 3.0 or r == 7.0:
            raise ValueError(f"rating {r} lies on an unassigned class boundary")
        out[i] = 2 if r > 7.0 else (1 if r > 3.0 else 0)
    return out


# ---------------------------------------------------------------------------
# Method fitting


@dataclass(frozen=True)
class FittedMethod:
    """A trained method: payload contents depend on the kind."""

    kind: str
    payload: tuple

    def parameters(self) -> list[np.ndarray]:
        """Every learned array, for bit-exact leakage audits."""
        out: list[np.ndarray] = []

        def collect(obj):
            if isinstance(obj, np.ndarray):
                out.append(obj)
            elif isinstance(obj, Mlp):
                for w, b in obj.params:
                    out.extend([w, b])
            elif isinstance(obj, (PlainModel, DannModel)):
                collect(obj.extractor)
                collect(obj.predictor)
                if isinstance(obj, DannModel):
                    collect(obj.domain_classifier)
            elif isinstance(obj, AddaModel):
                for part in (obj.source_encoder, obj.target_encoder, obj.classifier, obj.discriminator):
                    collect(part)
            elif isinstance(obj, SvmModel):
                out.extend([obj.dual_coefs, obj.biases, obj.support_rows])
            elif isinstance(obj, TcaModel):
                out.extend([obj.projection, obj.basis])
            elif isinstance(obj, KpcaModel):
                out.extend([obj.alphas, obj.basis, obj.col_means])

        for item in self.payload:
            collect(item)
        return out


def _deep_components(method: MethodSpec, in_dim: int, n_classes: int) -> tuple[MlpSpec, MlpSpec, MlpSpec]:
    extractor = MlpSpec(
        (in_dim, *method.hidden, method.feature_dim), method.activation, head="identity"
    )
    predictor = MlpSpec((method.feature_dim, n_classes), method.activation, head="softmax")
    adversary = MlpSpec((method.feature_dim, 2), method.activation, head="softmax")
    return extractor, predictor, adversary


def fit_method(
    method: MethodSpec,
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    seed: int,
) -> FittedMethod:
    """Train one method on a normalized fold.

    DA methods receive the unlabeled test-side features; test labels are
    not part of the signature, so fitting cannot read them.
    """
    classes = tuple(sorted({int(v) for v in train_y}))
    remap = {c: i for i, c in enumerate(classes)}
    y_pos = np.array([remap[int(v)] for v in train_y], dtype=np.int64)
    cfg = replace(method.train, seed=seed)

    if method.kind == "noDA-SVM":
        model = svm_train(
            train_X, train_y, method.kernel, method.C, method.svm_tol, method.svm_max_passes, seed
        )
        return FittedMethod(method.kind, (model,))
    if method.kind == "TCA-SVM":
        tca = tca_fit(train_X, test_X, method.kernel, method.dim, method.mu_reg)
        svm = svm_train(
            tca_transform(tca, train_X),
            train_y,
            method.svm_kernel,
            method.C,
            method.svm_tol,
            method.svm_max_passes,
            seed,
        )
        return FittedMethod(method.kind, (tca, svm))
    if method.kind == "KPCA-SVM":
        pooled = np.vstack([train_X, test_X])
        kpca = kpca_fit(pooled, method.kernel, min(method.dim, pooled.shape[0]))
        svm = svm_train(
            kpca_transform(kpca, train_X),
            train_y,
            method.svm_kernel,
            method.C,
            method.svm_tol,
            method.svm_max_passes,
            seed,
        )
        return FittedMethod(method.kind, (kpca, svm))

    ext_spec, pred_spec, adv_spec = _deep_components(method, train_X.shape[1], len(classes))
    if method.kind == "noDA-ANN":
        model = train_plain(train_X, y_pos, cfg, ext_spec, pred_spec)
        return FittedMethod(method.kind, (model, classes))
    if method.kind == "DANN":
        dann = make_dann(ext_spec, pred_spec, adv_spec, method.lam, seed)
        dann = train_dann(train_X, y_pos, test_X, cfg, dann)
        return FittedMethod(method.kind, (dann, classes))
    if method.kind == "ADDA":
        adda = make_adda(ext_spec, pred_spec, adv_spec, seed)
        adda = train_adda(train_X, y_pos, test_X, cfg, adda)
        return FittedMethod(method.kind, (adda, classes))
    raise ConfigError(f"unknown method kind {method.kind!r}")


def predict_method(fitted: FittedMethod, X: np.ndarray) -> np.ndarray:
    if fitted.kind == "noDA-SVM":
        return svm_predict(fitted.payload[0], X)
    if fitted.kind == "TCA-SVM":
        tca, svm = fitted.payload
        return svm_predict(svm, tca_transform(tca, X))
    if fitted.kind == "KPCA-SVM":
        kpca, svm = fitted.payload
        return svm_predict(svm, kpca_transform(kpca, X))
    classes = np.asarray(fitted.payload[1], dtype=np.int64)
    model = fitted.payload[0]
    if fitted.kind == "noDA-ANN":
        return classes[predict_composite(model.extractor, model.predictor, X)]
    if fitted.kind == "DANN":
        return classes[predict_composite(model.extractor, model.predictor, X)]
    if fitted.kind == "ADDA":
        return classes[predict_composite(model.target_encoder, model.classifier, X)]
    raise ConfigError(f"unknown method kind {fitted.kind!r}")


# ---------------------------------------------------------------------------
# Grid search


def apply_grid_point(method: MethodSpec, point: dict) -> MethodSpec:
    """Overlay one grid point onto a method spec."""
    spec_updates: dict = {}
    train_updates: dict = {}
    for key, value in point.items():
        if key in ("C", "dim", "mu_reg", "lam", "feature_dim", "activation"):
            spec_updates[key] = value
        elif key == "hidden":
            spec_updates[key] = tuple(value)
        elif key in ("kernel", "svm_kernel"):
            spec_updates[key] = KernelSpec(**value) if isinstance(value, dict) else value
        elif key == "gamma":
            spec_updates["kernel"] = KernelSpec(method.kernel.kind, value)
        elif key in ("learning_rate", "batch_size", "max_epochs", "patience"):
            train_updates[key] = value
        else:
            raise ConfigError(f"unknown grid parameter {key!r}")
    if train_updates:
        spec_updates["train"] = replace(method.train, **train_updates)
    return replace(method, **spec_updates)


def grid_search(
    method: MethodSpec,
    grid: dict,
    Xtr: np.ndarray,
    ytr: np.ndarray,
    Xval: np.ndarray,
    yval: np.ndarray,
    target_X: np.ndarray | None = None,
    seed: int = 0,
) -> MethodSpec:
    """Pick the grid point with the best validation accuracy.

    Points are scored in declared order and ties keep the earliest; points
    that fail to fit rank below every success. All points failing is an
    error that aggregates the individual messages.
    """
    keys = list(grid.keys())
    if not keys or any(len(grid[k]) == 0 for k in keys):
        raise ConfigError("grid must declare at least one value per parameter")
    target = target_X if target_X is not None else Xval
    best: tuple[float, MethodSpec] | None = None
    failures: list[str] = []
    for values in itertools.product(*(grid[k] for k in keys)):
        candidate = apply_grid_point(method, dict(zip(keys, values)))
        try:
            fitted = fit_method(candidate, Xtr, ytr, target, seed)
            score = accuracy(predict_method(fitted, Xval), yval)
        except Exception as exc:  # failed points lose to any finite result
            failures.append(f"{dict(zip(keys, values))}: {exc}")
            continue
        if best is None or score > best[0]:
            best = (score, candidate)
    if best is None:
        raise ExperimentError(
            f"all {method.kind} grid points failed: " + "; ".join(failures)
        )
    return best[1]


# ---------------------------------------------------------------------------
# The harness


@dataclass(frozen=True)
class _FoldOutcome:
    strategy: str
    method: str
    fold_name: str
    accuracy: float | None
    error: str | None
    seconds: float


def resolve_dataset(cfg: ExperimentConfig) -> DomainDataset:
    if isinstance(cfg.dataset, SyntheticShiftConfig):
        return generate_synthetic(cfg.dataset)
    return load_csv(cfg.dataset)


def folds_for(ds: DomainDataset, protocol: str) -> list[Fold]:
    return loso_folds(ds) if protocol == "loso" else hlso_folds(ds)


def resolve_fold_specs(
    methods: tuple[MethodSpec, ...],
    grids: dict,
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    strategy: NormStrategy,
    fold_name: str,
    root_seed: int,
) -> tuple[dict, str | None]:
    """Per-fold hyperparameter resolution with the architecture-fairness rule.

    When the DANN grid searches network shape, that search runs once and
    the winning architecture is pinned onto noDA-ANN and ADDA (their own
    grids drop any architecture keys). Returns (kind -> final spec,
    kind -> grid-search failure message for methods that could not resolve).
    """
    specs = {m.kind: m for m in methods}
    grid_by_kind = {k: dict(v) for k, v in grids.items()}
    pinned: dict = {}
    failures: dict[str, str] = {}

    dann_grid = grid_by_kind.get("DANN", {})
    if "DANN" in specs and dann_grid:
        seed = derive_seed(root_seed, strategy.value, "DANN", fold_name)
        try:
            tr2, val2 = stratified_indices(train_y, specs["DANN"].train.val_fraction, seed)
            best = grid_search(
                specs["DANN"], grid_by_kind.pop("DANN"),
                train_X[tr2], train_y[tr2], train_X[val2], train_y[val2],
                target_X=test_X, seed=seed,
            )
            specs["DANN"] = best
            if any(k in ARCH_KEYS for k in dann_grid):
                pinned = {k: getattr(best, k) for k in ARCH_KEYS}
        except Exception as exc:
            failures["DANN"] = f"architecture search failed: {exc}"

    for method in methods:
        if method.kind == "DANN":
            continue
        spec = specs[method.kind]
        if pinned and method.kind in ("noDA-ANN", "ADDA"):
            spec = replace(spec, **pinned)
        grid = {
            k: v
            for k, v in grid_by_kind.get(method.kind, {}).items()
            if not (pinned and k in ARCH_KEYS)
        }
        if grid:
            seed = derive_seed(root_seed, strategy.value, method.kind, fold_name)
            try:
                tr2, val2 = stratified_indices(train_y, spec.train.val_fraction, seed)
                spec = grid_search(
                    spec, grid, train_X[tr2], train_y[tr2], train_X[val2], train_y[val2],
                    target_X=test_X, seed=seed,
                )
            except Exception as exc:
                failures[method.kind] = f"grid search failed: {exc}"
        specs[method.kind] = spec
    return specs, failures


def _run_fold_group(
    ds: DomainDataset,
    fold: Fold,
    strategy: NormStrategy,
    methods: tuple[MethodSpec, ...],
    grids: dict,
    root_seed: int,
) -> list[_FoldOutcome]:
    """All methods on one (strategy, fold) cell group over shared normalization."""
    outcomes = []
    try:
        train_X, test_X = apply_strategy(ds, fold, strategy)
    except Exception as exc:
        msg = f"fold={fold.name} strategy={strategy.value}: {exc}"
        return [
            _FoldOutcome(strategy.value, m.kind, fold.name, None, msg, 0.0) for m in methods
        ]
    train_y = ds.labels[fold.train_idx]
    test_y = ds.labels[fold.test_idx]

    specs, failures = resolve_fold_specs(
        methods, grids, train_X, train_y, test_X, strategy, fold.name, root_seed
    )

    for method in methods:
        seed = derive_seed(root_seed, strategy.value, method.kind, fold.name)
        start = time.perf_counter()
        try:
            if method.kind in failures:
                raise ExperimentError(failures[method.kind])
            fitted = fit_method(specs[method.kind], train_X, train_y, test_X, seed)
            acc = accuracy(predict_method(fitted, test_X), test_y)
            outcomes.append(
                _FoldOutcome(
                    strategy.value, method.kind, fold.name, acc, None, time.perf_counter() - start
                )
            )
        except Exception as exc:
            msg = f"fold={fold.name} strategy={strategy.value} method={method.kind}: {exc}"
            outcomes.append(
                _FoldOutcome(
                    strategy.value, method.kind, fold.name, None, msg, time.perf_counter() - start
                )
            )
    return outcomes


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Run the full strategy-by-method grid over the protocol's folds."""
    ds = resolve_dataset(cfg)
    folds = folds_for(ds, cfg.protocol)
    groups = [(strategy, fold) for strategy in cfg.strategies for fold in folds]

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_fold_group, ds, fold, strategy, cfg.methods, cfg.grids, cfg.seed)
                for strategy, fold in groups
            ]
            outcome_lists = [f.result() for f in futures]
    else:
        outcome_lists = [
            _run_fold_group(ds, fold, strategy, cfg.methods, cfg.grids, cfg.seed)
            for strategy, fold in groups
        ]

    by_cell: dict[tuple[str, str], list[_FoldOutcome]] = {}
    for outcomes in outcome_lists:
        for o in outcomes:
            by_cell.setdefault((o.strategy, o.method), []).append(o)

    fold_names = tuple(f.name for f in folds)
    cells = []
    for strategy in cfg.strategies:
        for method in cfg.methods:
            key = (strategy.value, method.kind)
            ordered = sorted(by_cell[key], key=lambda o: fold_names.index(o.fold_name))
            seconds = float(sum(o.seconds for o in ordered))
            errors = [o.error for o in ordered if o.error is not None]
            if errors:
                cells.append(
                    CellResult(key[0], key[1], fold_names, None, "; ".join(errors), seconds)
                )
            else:
                cells.append(
                    CellResult(
                        key[0],
                        key[1],
                        fold_names,
                        tuple(o.accuracy for o in ordered),
                        None,
                        seconds,
                    )
                )
    return ExperimentReport(cfg, fold_names, tuple(cells))


# ---------------------------------------------------------------------------
# Rendering and persistence


def _ordered(report: ExperimentReport) -> tuple[list[str], list[str]]:
    strategies = [s for s in STRATEGY_ORDER if any(c.strategy == s for c in report.cells)]
    methods = [m for m in METHOD_ORDER if any(c.method == m for c in report.cells)]
    return strategies, methods


def emit_table(report: ExperimentReport, fmt: str = "markdown") -> str:
    """Render the strategy-by-method accuracy table.

    markdown: rows are strategies, columns methods (deep first), cells
    'MM.MM (SS.SS)' in percent, 'FAIL' for failed cells. csv: long format
    with full-precision mean/std fractions that reload as reals.
    """
    strategies, methods = _ordered(report)
    if fmt == "markdown":
        lines = ["| strategy | " + " | ".join(methods) + " |"]
        lines.append("| --- |" + " --- |" * len(methods))
        for s in strategies:
            row = [s]
            for m in methods:
                cell = report.cell(s, m)
                row.append(format_cell(cell.mean, cell.std) if cell.ok else "FAIL")
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        lines = ["strategy,method,n_folds,mean,std,status"]
        for s in strategies:
            for m in methods:
                cell = report.cell(s, m)
                if cell.ok:
                    lines.append(f"{s},{m},{len(cell.fold_names)},{cell.mean!r},{cell.std!r},ok")
                else:
                    lines.append(f"{s},{m},{len(cell.fold_names)},,,FAIL")
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown table format {fmt!r}")


def folds_csv(report: ExperimentReport) -> str:
    """Per-fold accuracy detail at full precision."""
    lines = ["strategy,method,fold,accuracy"]
    strategies, methods = _ordered(report)
    for s in strategies:
        for m in methods:
            cell = report.cell(s, m)
            for i, fold in enumerate(cell.fold_names):
                value = repr(cell.accuracies[i]) if cell.ok else "FAIL"
                lines.append(f"{s},{m},{fold},{value}")
    return "\n".join(lines) + "\n"


def emit_projection(ds: DomainDataset, fold: Fold, strategy: NormStrategy) -> list[dict]:
    """Project a fold's normalized rows to 2-D via the top two principal
    components of the combined train+test matrix."""
    train_X, test_X = apply_strategy(ds, fold, strategy)
    combined = np.vstack([train_X, test_X])
    idx = np.concatenate([fold.train_idx, fold.test_idx])
    split = ["train"] * len(fold.train_idx) + ["test"] * len(fold.test_idx)

    centered = combined - combined.mean(axis=0, keepdims=True)
    u, s_vals, vt = np.linalg.svd(centered, full_matrices=False)
    if s_vals.size == 0 or s_vals[0] <= 1e-12:
        from .errors import DegenerateDataError

        raise DegenerateDataError("projection input has no variance")
    axes = vt[: min(2, vt.shape[0])]
    for r in range(axes.shape[0]):
        j = int(np.argmax(np.abs(axes[r])))
        if axes[r, j] < 0:
            axes[r] = -axes[r]
    scores = centered @ axes.T
    if scores.shape[1] < 2:
        scores = np.hstack([scores, np.zeros((scores.shape[0], 1))])

    order = np.argsort(idx, kind="stable")
    rows = []
    for pos in order:
        i = int(idx[pos])
        rows.append(
            {
                "x": float(scores[pos, 0]),
                "y": float(scores[pos, 1]),
                "subject": int(ds.subjects[i]),
                "session": int(ds.sessions[i]),
                "split": split[pos],
                "label": int(ds.labels[i]),
            }
        )
    return rows


def projection_csv(rows: list[dict]) -> str:
    lines = ["x,y,subject,session,split,label"]
    for r in rows:
        lines.append(
            f"{r['x']!r},{r['y']!r},{r['subject']},{r['session']},{r['split']},{r['label']}"
        )
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def kernel_dict(k: KernelSpec) -> dict:
        return {"kind": k.kind, "gamma": k.gamma}

    methods = []
    for m in cfg.methods:
        methods.append(
            {
                "kind": m.kind,
                "kernel": kernel_dict(m.kernel),
                "svm_kernel": kernel_dict(m.svm_kernel),
                "dim": m.dim,
                "mu_reg": m.mu_reg,
                "C": m.C,
                "svm_tol": m.svm_tol,
                "svm_max_passes": m.svm_max_passes,
                "hidden": list(m.hidden),
                "feature_dim": m.feature_dim,
                "activation": m.activation,
                "lam": m.lam,
                "train": {
                    "learning_rate": m.train.learning_rate,
                    "batch_size": m.train.batch_size,
                    "max_epochs": m.train.max_epochs,
                    "patience": m.train.patience,
                    "seed": m.train.seed,
                    "val_fraction": m.train.val_fraction,
                },
            }
        )
    if isinstance(cfg.dataset, SyntheticShiftConfig):
        dataset = {"synthetic": dict(vars(cfg.dataset))}
    else:
        dataset = {"csv": str(cfg.dataset)}
    return {
        "dataset": dataset,
        "protocol": cfg.protocol,
        "strategies": [s.value for s in cfg.strategies],
        "methods": methods,
        "grids": cfg.grids,
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "emit_projections": cfg.emit_projections,
    }


def config_from_dict(raw: dict) -> ExperimentConfig:
    if "dataset" not in raw:
        raise ConfigError("config needs a 'dataset' entry ('synthetic' or 'csv')")
    ds_raw = raw["dataset"]
    if "synthetic" in ds_raw:
        dataset: SyntheticShiftConfig | str = SyntheticShiftConfig(**ds_raw["synthetic"])
    elif "csv" in ds_raw:
        dataset = str(ds_raw["csv"])
    else:
        raise ConfigError("dataset must declare either 'synthetic' or 'csv'")

    methods = []
    for m in raw.get("methods", [{"kind": "noDA-SVM"}]):
        m = dict(m)
        kwargs: dict = {"kind": m.pop("kind")}
        if "kernel" in m:
            kwargs["kernel"] = KernelSpec(**{k: v for k, v in m.pop("kernel").items() if v is not None})
        if "svm_kernel" in m:
            kwargs["svm_kernel"] = KernelSpec(
                **{k: v for k, v in m.pop("svm_kernel").items() if v is not None}
            )
        if "train" in m:
            kwargs["train"] = TrainConfig(**m.pop("train"))
        if "hidden" in m:
            kwargs["hidden"] = tuple(m.pop("hidden"))
        for key in ("dim", "mu_reg", "C", "svm_tol", "svm_max_passes", "feature_dim", "activation", "lam"):
            if key in m:
                kwargs[key] = m.pop(key)
        if m:
            raise ConfigError(f"unknown method fields: {sorted(m)}")
        methods.append(MethodSpec(**kwargs))

    strategies = tuple(NormStrategy.from_name(s) for s in raw.get("strategies", ["noNorm", "Z2"]))
    return ExperimentConfig(
        dataset=dataset,
        protocol=raw.get("protocol", "loso"),
        strategies=strategies,
        methods=tuple(methods),
        grids=raw.get("grids", {}),
        seed=int(raw.get("seed", 0)),
        output_dir=str(raw.get("output_dir", "report")),
        emit_projections=bool(raw.get("emit_projections", False)),
    )


def write_report(report: ExperimentReport, outdir) -> Path:
    """Write report.md, report.csv, folds.csv, config.json and projections."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.csv").write_text(emit_table(report, "csv"), encoding="utf-8")
    (outdir / "folds.csv").write_text(folds_csv(report), encoding="utf-8")
    (outdir / "config.json").write_text(
        json.dumps(config_to_dict(report.config), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    md = ["# Experiment report", ""]
    md.append(f"- protocol: {report.config.protocol}")
    md.append(f"- seed: {report.config.seed}")
    md.append(f"- folds: {', '.join(report.fold_names)}")
    md.append("- projection method: PCA (top 2 components)")
    md.append("")
    md.append(emit_table(report, "markdown"))
    md.append("## Cell timings (seconds)")
    md.append("")
    for cell in report.cells:
        md.append(f"- {cell.strategy} / {cell.method}: {cell.seconds:.3f}")
        if not cell.ok:
            md.append(f"  - FAILED: {cell.error}")
    (outdir / "report.md").write_text("\n".join(md) + "\n", encoding="utf-8")

    if report.config.emit_projections:
        ds = resolve_dataset(report.config)
        for strategy in report.config.strategies:
            for fold in folds_for(ds, report.config.protocol):
                try:
                    rows = emit_projection(ds, fold, strategy)
                except Exception:
                    continue  # skip strategies that reject this fold
                name = f"projection_{strategy.value}_{fold.name}.csv"
                (outdir / name).write_text(projection_csv(rows), encoding="utf-8")
    return outdir
