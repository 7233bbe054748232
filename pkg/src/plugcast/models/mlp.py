"""Feed-forward network trained with backprop and Adam, in plain numpy.

Architecture is fixed by variant: scaled lag inputs plus one-hot calendar
blocks feed two ReLU hidden layers of 100 and 50 units and a single linear
output. Inverted dropout (rate 0.2) regularizes both hidden layers during
training only. Lag columns are standardized with statistics taken from the
training split alone; one-hot blocks pass through unscaled.

One PCG64 stream seeded from the training config drives weight init, the
per-epoch shuffle, and every dropout mask, so a run is reproducible from
(matrix, variant, config) alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DivergenceError
from ..features import FeatureMatrix, FeatureSpec, lag_scaler

HIDDEN_WIDTHS = (100, 50)

VARIANTS = ("v1", "v2", "v3")


# ---------------------------------------------------------------------------
# layer stack: list of (W, b) with W shaped (fan_in, fan_out)
# ---------------------------------------------------------------------------

def init_layers(sizes, rng_or_seed) -> list:
    """He-initialized stack: W ~ N(0, 2/fan_in), biases zero."""
    rng = (
        rng_or_seed
        if isinstance(rng_or_seed, np.random.Generator)
        else np.random.default_rng(rng_or_seed)
    )
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        layers.append((W, np.zeros(fan_out)))
    return layers


def predict_layers(layers, X: np.ndarray) -> np.ndarray:
    """Inference-mode forward pass: no dropout, no scaling of activations."""
    H = np.asarray(X, dtype=float)
    for W, b in layers[:-1]:
        H = np.maximum(H @ W + b, 0.0)
    W, b = layers[-1]
    return (H @ W + b)[:, 0]


def _forward_train(layers, X, dropout_rate, rng):
    """Forward pass keeping the caches backprop needs.

    Inverted dropout: units are zeroed with probability dropout_rate and
    survivors scaled by 1/(1-rate), so inference needs no rescaling.
    """
    inputs = [np.asarray(X, dtype=float)]  # input seen by each layer
    pre = []    # hidden pre-activations
    mults = []  # dropout multiplier per hidden layer, None when disabled
    H = inputs[0]
    for W, b in layers[:-1]:
        Z = H @ W + b
        A = np.maximum(Z, 0.0)
        if dropout_rate > 0.0:
            keep = rng.random(A.shape) >= dropout_rate
            M = keep / (1.0 - dropout_rate)
            H = A * M
        else:
            M = None
            H = A
        pre.append(Z)
        mults.append(M)
        inputs.append(H)
    W, b = layers[-1]
    return H @ W + b, (inputs, pre, mults)


def _backward(layers, cache, y, out):
    """Gradients of mean squared error w.r.t. every weight and bias."""
    inputs, pre, mults = cache
    batch = len(y)
    delta = 2.0 * (out - np.asarray(y, dtype=float).reshape(-1, 1)) / batch
    grads = [None] * len(layers)
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        grads[li] = (inputs[li].T @ delta, delta.sum(axis=0))
        if li > 0:
            dH = delta @ W.T
            if mults[li - 1] is not None:
                dH = dH * mults[li - 1]
            delta = dH * (pre[li - 1] > 0)
    return grads


def mlp_loss(layers, X, y) -> float:
    """Inference-mode mean squared error."""
    r = predict_layers(layers, X) - np.asarray(y, dtype=float)
    return float(np.mean(r * r))


def mlp_gradients(layers, X, y):
    """MSE gradients with dropout disabled, flattened as [W1, b1, W2, ...]."""
    out, cache = _forward_train(layers, X, 0.0, rng=None)
    return _flatten(_backward(layers, cache, y, out))


def _flatten(layers) -> list:
    flat = []
    for W, b in layers:
        flat.append(W)
        flat.append(b)
    return flat


def _to_layers(flat) -> list:
    return [(flat[i], flat[i + 1]) for i in range(0, len(flat), 2)]


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def adam_step(
    params,
    grads,
    m,
    v,
    t: int,
    step_size: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
):
    """One Adam update over parallel lists of arrays; returns new lists.

    Biased first and second moments are updated in place of nothing (the
    inputs are not mutated), then bias-corrected with the 1-based step
    count t before the parameter move.
    """
    if t < 1:
        raise ValueError("step count t starts at 1")
    corr1 = 1.0 - beta1**t
    corr2 = 1.0 - beta2**t
    new_p, new_m, new_v = [], [], []
    for p, g, mi, vi in zip(params, grads, m, v, strict=True):
        mi = beta1 * mi + (1.0 - beta1) * g
        vi = beta2 * vi + (1.0 - beta2) * g * g
        new_p.append(p - step_size * (mi / corr1) / (np.sqrt(vi / corr2) + epsilon))
        new_m.append(mi)
        new_v.append(vi)
    return new_p, new_m, new_v


# ---------------------------------------------------------------------------
# variant model and training loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 100
    dropout_rate: float = 0.2
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    # Default is to restore the parameters of the epoch with the lowest
    # validation loss; set True to keep the last epoch instead.
    keep_last_epoch: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def as_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "dropout_rate": self.dropout_rate,
            "step_size": self.step_size,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "keep_last_epoch": self.keep_last_epoch,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class MlpModel:
    variant: str
    spec: FeatureSpec
    layers: list
    lag_means: np.ndarray
    lag_stds: np.ndarray
    seed: int

    family = "mlp"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        self.lag_means = np.asarray(self.lag_means, dtype=float)
        self.lag_stds = np.asarray(self.lag_stds, dtype=float)
        widths = tuple(W.shape[1] for W, _ in self.layers[:-1])
        if widths != HIDDEN_WIDTHS:
            raise ValueError(f"hidden widths {widths}, expected {HIDDEN_WIDTHS}")
        if self.layers[0][0].shape[0] != self.spec.input_width:
            raise ValueError(
                f"input width {self.layers[0][0].shape[0]} does not match "
                f"feature spec ({self.spec.input_width})"
            )

    @property
    def label(self) -> str:
        return f"mlp-{self.variant}"

    def design_rows(self, matrix: FeatureMatrix, indices) -> np.ndarray:
        """Scaled lags plus the variant's one-hot calendar blocks."""
        if tuple(matrix.spec.lags) != tuple(self.spec.lags):
            raise DataError(
                f"matrix lags {matrix.spec.lags} differ from model lags {self.spec.lags}"
            )
        rows = np.asarray(indices, dtype=np.int64)
        blocks = [(matrix.lag_values[rows] - self.lag_means) / self.lag_stds]
        if self.spec.use_dow:
            blocks.append(np.eye(7)[matrix.dow[rows]])
        if self.spec.use_month:
            blocks.append(np.eye(12)[matrix.month[rows] - 1])
        if self.spec.use_hour:
            blocks.append(np.eye(24)[matrix.hour[rows]])
        return np.hstack(blocks)

    def predict_rows(self, matrix: FeatureMatrix, indices) -> np.ndarray:
        return predict_layers(self.layers, self.design_rows(matrix, indices))


def init_mlp(variant: str, seed: int) -> MlpModel:
    """Untrained variant model with identity lag scaling."""
    spec = FeatureSpec.for_variant(variant)
    sizes = [spec.input_width, *HIDDEN_WIDTHS, 1]
    return MlpModel(
        variant=variant,
        spec=spec,
        layers=init_layers(sizes, seed),
        lag_means=np.zeros(len(spec.lags)),
        lag_stds=np.ones(len(spec.lags)),
        seed=seed,
    )


def train_mlp(
    matrix: FeatureMatrix,
    variant: str,
    config: TrainConfig,
) -> tuple[MlpModel, dict]:
    """Fit one variant on the matrix's train split.

    Runs config.epochs passes over the shuffled training rows in batches of
    config.batch_size (final short batch included), updating with Adam.
    After every epoch the full train and validation losses are recorded in
    inference mode. Unless keep_last_epoch is set, the returned parameters
    are those of the epoch with the lowest validation loss.

    Returns (model, history) where history has per-epoch "train" and
    "validation" loss lists and the checkpointed "best_epoch" (None when
    epochs == 0 or keep_last_epoch is set).
    """
    if not matrix.has_split():
        raise DataError("matrix rows carry no split labels; run split_rows first")
    spec = FeatureSpec.for_variant(variant)
    if tuple(matrix.spec.lags) != tuple(spec.lags):
        raise DataError(
            f"matrix lags {matrix.spec.lags} do not match variant lags {spec.lags}"
        )
    tr = matrix.indices_of("train")
    va = matrix.indices_of("validation")
    if len(tr) == 0 or len(va) == 0:
        raise DataError("training needs non-empty train and validation splits")

    means, stds = lag_scaler(matrix)
    rng = np.random.default_rng(config.seed)
    sizes = [spec.input_width, *HIDDEN_WIDTHS, 1]
    model = MlpModel(
        variant=variant,
        spec=spec,
        layers=init_layers(sizes, rng),
        lag_means=means,
        lag_stds=stds,
        seed=config.seed,
    )
    X_tr = model.design_rows(matrix, tr)
    y_tr = matrix.targets[tr]
    X_va = model.design_rows(matrix, va)
    y_va = matrix.targets[va]

    params = _flatten(model.layers)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    t = 0
    hist_train: list[float] = []
    hist_val: list[float] = []
    best_val = np.inf
    best_epoch = None
    best_params = None

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(tr))
        layers = _to_layers(params)
        for lo in range(0, len(order), config.batch_size):
            rows = order[lo : lo + config.batch_size]
            out, cache = _forward_train(layers, X_tr[rows], config.dropout_rate, rng)
            grads = _flatten(_backward(layers, cache, y_tr[rows], out))
            t += 1
            params, m, v = adam_step(
                params, grads, m, v, t,
                step_size=config.step_size,
                beta1=config.beta1,
                beta2=config.beta2,
                epsilon=config.epsilon,
            )
            layers = _to_layers(params)
        train_loss = mlp_loss(layers, X_tr, y_tr)
        val_loss = mlp_loss(layers, X_va, y_va)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise DivergenceError(f"{model.label}: loss non-finite at epoch {epoch}")
        hist_train.append(train_loss)
        hist_val.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = [p.copy() for p in params]

    if not config.keep_last_epoch and best_params is not None:
        params = best_params
    model.layers = _to_layers(params)
    history = {
        "train": hist_train,
        "validation": hist_val,
        "best_epoch": None if config.keep_last_epoch else best_epoch,
    }
    return model, history
