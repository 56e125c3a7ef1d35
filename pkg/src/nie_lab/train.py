"""Datasets, MSE loss, parameter-shift gradients and full-batch Adam training."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.preprocessing import MinMaxScaler

from .circuits import (
    NOISELESS,
    CircuitSpec,
    NoiseSetting,
    build_circuit,
    grad_statevector,
    predict_batch,
    predict_statevector,
    value_and_grad_batch,
)
from .report import fmt

# Independent random streams: spec seed ids are combined with these tags.
STREAM_DATA = 0
STREAM_NIE = 1
STREAM_TRAIN = 2

ADAM_EPS = 1e-8
LABEL_RANGE = (-1.0, 1.0)
ANGLE_RANGE = (-np.pi, np.pi)


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream)])


def init_params(n_params: int, seed: int, stream: int = STREAM_TRAIN) -> np.ndarray:
    """theta_0 ~ Uniform[0, 2 pi) per parameter."""
    return stream_rng(seed, stream).uniform(0.0, 2.0 * np.pi, n_params)


# ---------------------------------------------------------------------------
# datasets


def _fit_scaler(values: np.ndarray, target: tuple[float, float], what: str) -> MinMaxScaler:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    span = values.max(axis=0) - values.min(axis=0)
    for j, s in enumerate(span):
        if not s > 0:
            raise ValueError(f"{what} column {j} has zero range on the training rows; cannot rescale")
    return MinMaxScaler(feature_range=target).fit(values)


@dataclass(eq=False)
class Dataset:
    """Model-ready features and labels plus the raw values and fitted scalers.

    ``features`` are what the circuit encoder receives; ``labels`` are the
    scaled targets.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    raw_features: np.ndarray
    raw_labels: np.ndarray
    feature_scaler: MinMaxScaler | None = None
    label_scaler: MinMaxScaler | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float).reshape(len(self.labels), -1)
        self.train_idx = np.asarray(self.train_idx, dtype=int)
        self.test_idx = np.asarray(self.test_idx, dtype=int)
        both = np.concatenate([self.train_idx, self.test_idx])
        if len(set(both.tolist())) != len(both) or sorted(both.tolist()) != list(range(len(self.labels))):
            raise ValueError("train and test indices must be disjoint and cover every sample")

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def x_train(self) -> np.ndarray:
        return self.features[self.train_idx]

    @property
    def y_train(self) -> np.ndarray:
        return self.labels[self.train_idx]

    @property
    def x_test(self) -> np.ndarray:
        return self.features[self.test_idx]

    @property
    def y_test(self) -> np.ndarray:
        return self.labels[self.test_idx]

    def split_labels(self) -> list[str]:
        out = ["test"] * len(self.labels)
        for i in self.train_idx:
            out[i] = "train"
        return out


def _split(rng: np.random.Generator, m_total: int, n_train: int) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(m_total)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def gen_sinusoidal(
    seed: int,
    m_total: int = 50,
    train_fraction: float = 0.30,
    noise_amp: float = 0.4,
    noise_std: float = 0.5,
    name: str = "sinusoidal",
) -> Dataset:
    """y = sin(pi x) + noise_amp * N(0, noise_std), x ~ U[-1, 1].

    Features stay in [-1, 1] (the HEA encoder multiplies by pi); labels are
    min-max scaled to [-1, 1] on the training rows.
    """
    if m_total < 2:
        raise ValueError("need at least 2 samples")
    n_train = int(round(train_fraction * m_total))
    if not 0 < n_train < m_total:
        raise ValueError(f"train fraction {train_fraction} leaves an empty train or test split")
    rng = stream_rng(seed, STREAM_DATA)
    x = rng.uniform(-1.0, 1.0, m_total)
    eps = noise_amp * rng.normal(0.0, noise_std, m_total)
    y = np.sin(np.pi * x) + eps
    train, test = _split(rng, m_total, n_train)
    scaler = _fit_scaler(y[train], LABEL_RANGE, "label")
    labels = scaler.transform(y[:, None])[:, 0]
    meta = {"kind": name, "seed": seed, "m_total": m_total, "train_fraction": train_fraction,
            "noise_amp": noise_amp, "noise_std": noise_std}
    return Dataset(name, x[:, None], labels, train, test, x[:, None], y, None, scaler, meta)


def gen_sinusoidal2(seed: int) -> Dataset:
    return gen_sinusoidal(seed, m_total=20, train_fraction=0.75, name="sinusoidal2")


def gen_random_inputs(seed: int, kind: str, m_total: int = 15, n_features: int = 1) -> Dataset:
    """Label-free inputs for the dataset-independence check: ``uniform`` on
    [-pi, pi] or ``gaussian`` N(0, 1). Every row is a training row; labels are 0."""
    rng = stream_rng(seed, STREAM_DATA)
    if kind == "uniform":
        x = rng.uniform(-np.pi, np.pi, (m_total, n_features))
    elif kind == "gaussian":
        x = rng.normal(0.0, 1.0, (m_total, n_features))
    else:
        raise ValueError(f"unknown random input kind {kind!r}")
    y = np.zeros(m_total)
    meta = {"kind": kind, "seed": seed, "m_total": m_total, "n_features": n_features}
    return Dataset(kind, x, y, np.arange(m_total), np.zeros(0, dtype=int), x, y, None, None, meta)


DATASET_KINDS = ("sinusoidal", "sinusoidal2", "uniform", "gaussian")


def make_dataset(kind: str, seed: int, **kw) -> Dataset:
    if kind == "sinusoidal":
        return gen_sinusoidal(seed, **kw)
    if kind == "sinusoidal2":
        return gen_sinusoidal2(seed)
    if kind in ("uniform", "gaussian"):
        return gen_random_inputs(seed, kind, **kw)
    raise ValueError(f"unknown dataset kind {kind!r}; expected one of {DATASET_KINDS}")


def _read_numeric_csv(path: Path, columns: Sequence[str]) -> dict[str, np.ndarray]:
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise ValueError(f"{path}: missing column(s) {missing}; header is {header}")
        out = {c: [] for c in columns}
        for lineno, row in enumerate(reader, start=2):
            for c in columns:
                cell = row.get(c)
                try:
                    out[c].append(float(cell))
                except (TypeError, ValueError):
                    raise ValueError(f"{path}: row {lineno}, column {c!r}: non-numeric value {cell!r}") from None
    if not out[columns[0]]:
        raise ValueError(f"{path}: no data rows")
    return {c: np.asarray(v) for c, v in out.items()}


def load_csv_dataset(
    path, feature_cols: Sequence[str], label_col: str, train_count: int, seed: int
) -> Dataset:
    """Two-feature style CSV: features to [-pi, pi] and labels to [-1, 1], both
    min-max scalers fitted on a random ``train_count`` rows."""
    path = Path(path)
    cols = _read_numeric_csv(path, list(feature_cols) + [label_col])
    x = np.stack([cols[c] for c in feature_cols], axis=1)
    y = cols[label_col]
    m_total = len(y)
    if not 0 < train_count < m_total:
        raise ValueError(f"train_count {train_count} must lie in (0, {m_total})")
    train, test = _split(stream_rng(seed, STREAM_DATA), m_total, train_count)
    fs = _fit_scaler(x[train], ANGLE_RANGE, "feature")
    ls = _fit_scaler(y[train], LABEL_RANGE, "label")
    meta = {"kind": "csv", "path": str(path), "feature_cols": list(feature_cols), "label_col": label_col,
            "train_count": train_count, "seed": seed}
    return Dataset(path.stem, fs.transform(x), ls.transform(y[:, None])[:, 0], train, test, x, y, fs, ls, meta)


def write_dataset_csv(ds: Dataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nf = ds.raw_features.shape[1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(nf)] + ["y", "split"])
        for i, split in enumerate(ds.split_labels()):
            w.writerow([fmt(v) for v in ds.raw_features[i]] + [fmt(ds.raw_labels[i]), split])


def read_dataset_csv(path, label_scale: bool = True) -> Dataset:
    """Read a file written by ``write_dataset_csv`` (columns x0.., y, split)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    xcols = sorted((c for c in rows[0] if c.startswith("x")), key=lambda c: int(c[1:]))
    x = np.array([[float(r[c]) for c in xcols] for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    split = [r["split"] for r in rows]
    train = np.array([i for i, s in enumerate(split) if s == "train"], dtype=int)
    test = np.array([i for i, s in enumerate(split) if s == "test"], dtype=int)
    scaler = None
    labels = y.copy()
    if label_scale and len(train) and np.ptp(y[train]) > 0:
        scaler = _fit_scaler(y[train], LABEL_RANGE, "label")
        labels = scaler.transform(y[:, None])[:, 0]
    return Dataset(path.stem, x, labels, train, test, x, y, None, scaler, {"kind": "file", "path": str(path)})


# ---------------------------------------------------------------------------
# loss and gradients


def mse(preds, labels) -> float:
    a = np.asarray(preds, dtype=float)
    b = np.asarray(labels, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("mse of an empty set")
    return float(np.mean((a - b) ** 2))


def loss_and_grad(spec: CircuitSpec, xs, ys, theta, noise: NoiseSetting = NOISELESS) -> tuple[float, np.ndarray]:
    """MSE and its gradient: parameter-shift Jacobian chained with 2 (f - y) / M."""
    ys = np.asarray(ys, dtype=float)
    f, jac = value_and_grad_batch(spec, np.asarray(xs, dtype=float).reshape(len(ys), -1), theta, noise)
    r = f - ys
    return float(np.mean(r**2)), (2.0 / len(ys)) * (jac.T @ r)


def grad_loss(spec: CircuitSpec, xs, ys, theta, noise: NoiseSetting = NOISELESS) -> np.ndarray:
    return loss_and_grad(spec, xs, ys, theta, noise)[1]


def _loss_and_grad_statevector(spec, xs, ys, theta) -> tuple[float, np.ndarray]:
    ys = np.asarray(ys, dtype=float)
    xs = np.asarray(xs, dtype=float).reshape(len(ys), -1)
    f = np.zeros(len(ys))
    jac = np.zeros((len(ys), spec.n_params))
    for i, x in enumerate(xs):
        f[i], jac[i] = grad_statevector(spec, x, theta)
    r = f - ys
    return float(np.mean(r**2)), (2.0 / len(ys)) * (jac.T @ r)


# ---------------------------------------------------------------------------
# Adam


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = ADAM_EPS

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")


class AdamState(NamedTuple):
    m: np.ndarray
    v: np.ndarray
    t: int

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(theta, grad, state: AdamState, config: AdamConfig = AdamConfig()) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update."""
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape or state.m.shape != theta.shape:
        raise ValueError("theta, gradient and optimizer state must have matching shapes")
    t = state.t + 1
    m = config.beta1 * state.m + (1 - config.beta1) * grad
    v = config.beta2 * state.v + (1 - config.beta2) * grad**2
    m_hat = m / (1 - config.beta1**t)
    v_hat = v / (1 - config.beta2**t)
    return theta - config.lr * m_hat / (np.sqrt(v_hat) + config.eps), AdamState(m, v, t)


# ---------------------------------------------------------------------------
# training runs

ENGINES = ("density", "statevector")


@dataclass(frozen=True)
class TrainConfig:
    circuit: str = "hea"
    layers: int = 4
    noise_kind: str | None = "depolarizing"
    p: float = 0.0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 300
    seed: int = 0
    init: str = "uniform_0_2pi"
    engine: str = "density"
    encoding_scale: float | None = None
    entangler: str = "chain"

    def __post_init__(self):
        AdamConfig(self.lr, self.beta1, self.beta2)
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.init != "uniform_0_2pi":
            raise ValueError("only the uniform_0_2pi initialization is supported")
        if self.engine == "statevector" and self.p != 0.0:
            raise ValueError("the statevector engine is noiseless; use p = 0")
        NoiseSetting(self.noise_kind, self.p)

    @property
    def noise(self) -> NoiseSetting:
        return NoiseSetting(self.noise_kind, self.p)

    def build(self) -> CircuitSpec:
        return build_circuit(self.circuit, self.layers, self.encoding_scale, self.entangler)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class TrainHistory:
    train_mse: np.ndarray
    test_mse: np.ndarray
    theta_final: np.ndarray
    theta_init: np.ndarray
    config: TrainConfig

    @property
    def final_train_mse(self) -> float:
        return float(self.train_mse[-1])

    @property
    def final_test_mse(self) -> float:
        return float(self.test_mse[-1])

    def rows(self) -> list[tuple[int, float, float]]:
        return [(e, float(a), float(b)) for e, (a, b) in enumerate(zip(self.train_mse, self.test_mse))]


def train_run(config: TrainConfig, dataset: Dataset, spec: CircuitSpec | None = None) -> TrainHistory:
    """Full-batch Adam from theta_0 ~ U[0, 2 pi); MSEs recorded before every step
    and after the last one (epochs + 1 entries)."""
    spec = config.build() if spec is None else spec
    if dataset.n_features != spec.n_features:
        raise ValueError(f"dataset has {dataset.n_features} features, circuit expects {spec.n_features}")
    if len(dataset.train_idx) == 0:
        raise ValueError("dataset has no training rows")
    noise = config.noise
    adam = AdamConfig(config.lr, config.beta1, config.beta2)
    theta = init_params(spec.n_params, config.seed, STREAM_TRAIN)
    theta0 = theta.copy()
    state = AdamState.zeros(spec.n_params)
    xtr, ytr, xte, yte = dataset.x_train, dataset.y_train, dataset.x_test, dataset.y_test
    has_test = len(yte) > 0
    train_hist, test_hist = [], []
    for epoch in range(config.epochs + 1):
        if config.engine == "density":
            loss, grad = loss_and_grad(spec, xtr, ytr, theta, noise)
            test = mse(predict_batch(spec, xte, theta, noise), yte) if has_test else np.nan
        else:
            loss, grad = _loss_and_grad_statevector(spec, xtr, ytr, theta)
            test = mse([predict_statevector(spec, x, theta) for x in xte], yte) if has_test else np.nan
        train_hist.append(loss)
        test_hist.append(test)
        if epoch < config.epochs:
            theta, state = adam_step(theta, grad, state, adam)
    return TrainHistory(np.array(train_hist), np.array(test_hist), theta, theta0, config)


def estimate_p_star_mse(runs: dict) -> tuple[float, float, list[float]]:
    """Mean and standard deviation over seeds of argmin_p final test MSE.

    ``runs`` maps (p, seed) to final test MSE. Ties go to the smaller p.
    Returns (p_star, std, per-seed argmins).
    """
    ps = sorted({float(p) for p, _ in runs})
    seeds = sorted({s for _, s in runs})
    if len(seeds) < 2:
        raise ValueError("need at least 2 seeds per noise level")
    missing = [(p, s) for p in ps for s in seeds if (p, s) not in runs and (float(p), s) not in runs]
    if missing:
        raise ValueError(f"missing grid cells: {missing[:5]}")
    lookup = {(float(p), s): v for (p, s), v in runs.items()}
    picks = []
    for s in seeds:
        vals = np.array([lookup[(p, s)] for p in ps], dtype=float)
        picks.append(ps[int(np.argmin(vals))])
    return float(np.mean(picks)), float(np.std(picks)), picks


__all__ = [
    "Dataset", "gen_sinusoidal", "gen_sinusoidal2", "gen_random_inputs", "make_dataset", "load_csv_dataset",
    "write_dataset_csv", "read_dataset_csv", "mse", "loss_and_grad", "grad_loss", "AdamConfig", "AdamState",
    "adam_step", "TrainConfig", "TrainHistory", "train_run", "estimate_p_star_mse", "init_params",
    "stream_rng", "STREAM_NIE", "STREAM_TRAIN", "DATASET_KINDS",
]
