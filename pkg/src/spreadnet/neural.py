"""From-scratch feedforward network with gradient training and restarts.

The trainer is plain reverse-mode gradient descent over full-batch squared
error, with a monotone step rule: an epoch whose loss would rise is
rejected and the rate halved; a successful epoch restores the initial
rate. Inputs and the target are min-max scaled to [-1, 1] on the training
split only; the forward pass inverts the target scaling, so predictions
come back in original units.

Models serialize to a versioned JSON text format whose floats round-trip
bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    AllDiverged,
    ConstantOutput,
    DimensionMismatch,
    DivergedTraining,
    TooFewRows,
)
from .metrics import ism_sort_key
from .preprocess import TrainingMatrix

MODEL_FORMAT = "spreadnet-model"
MODEL_FORMAT_VERSION = 1

_MIN_LEARNING_RATE = 1e-15
_INIT_WEIGHT_RANGE = 0.5


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------


def _tanh(z):
    return np.tanh(z)


def _dtanh(z):
    t = np.tanh(z)
    return 1.0 - t * t


def _identity(z):
    return z


def _didentity(z):
    return np.ones_like(z)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _dsigmoid(z):
    s = _sigmoid(z)
    return s * (1.0 - s)


ACTIVATIONS = {
    "tanh": (_tanh, _dtanh),
    "identity": (_identity, _didentity),
    "sigmoid": (_sigmoid, _dsigmoid),
}


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """Invertible per-column map y = x * scale + offset."""

    scale: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        scale = np.atleast_1d(np.asarray(self.scale, dtype=np.float64))
        offset = np.atleast_1d(np.asarray(self.offset, dtype=np.float64))
        if scale.shape != offset.shape:
            raise ValueError("scale and offset must have the same shape")
        if np.any(scale == 0.0) or not np.all(np.isfinite(scale)):
            raise ValueError("scale must be finite and nonzero (map must invert)")
        scale.setflags(write=False)
        offset.setflags(write=False)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "offset", offset)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.scale + self.offset

    def invert(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.offset) / self.scale

    @staticmethod
    def fit_minmax(columns: np.ndarray) -> "AffineMap":
        """Map each column's [min, max] onto [-1, 1]; constant columns map to 0."""
        cols = np.atleast_2d(np.asarray(columns, dtype=np.float64))
        lo = cols.min(axis=0)
        hi = cols.max(axis=0)
        span = hi - lo
        scale = np.where(span > 0, 2.0 / np.where(span > 0, span, 1.0), 1.0)
        offset = np.where(span > 0, -(hi + lo) / np.where(span > 0, span, 1.0), -lo)
        return AffineMap(scale, offset)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkModel:
    """Layer sizes, weight matrices (bias folded in), and fitted scalings.

    ``weights[l]`` has shape (fan_out, fan_in + 1); the last column is the
    bias. The target scaling is inverted on the way out, so ``forward``
    speaks original units.
    """

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    hidden_activation: str = "tanh"
    output_activation: str = "identity"
    input_scaling: AffineMap | None = None
    output_scaling: AffineMap | None = None

    def __post_init__(self):
        if len(self.layer_sizes) < 2 or any(s <= 0 for s in self.layer_sizes):
            raise ValueError(f"bad layer sizes {self.layer_sizes}")
        if self.layer_sizes[-1] != 1:
            raise ValueError("output layer must have exactly one unit")
        if len(self.weights) != len(self.layer_sizes) - 1:
            raise ValueError("one weight matrix per layer transition required")
        frozen = []
        for l, w in enumerate(self.weights):
            w = np.asarray(w, dtype=np.float64)
            expect = (self.layer_sizes[l + 1], self.layer_sizes[l] + 1)
            if w.shape != expect:
                raise ValueError(f"weight matrix {l} has shape {w.shape}, expected {expect}")
            if not np.all(np.isfinite(w)):
                raise ValueError(f"weight matrix {l} contains non-finite entries")
            w.setflags(write=False)
            frozen.append(w)
        object.__setattr__(self, "weights", tuple(frozen))
        for name in (self.hidden_activation, self.output_activation):
            if name not in ACTIVATIONS:
                raise ValueError(f"unknown activation {name!r}")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]


def _forward_scaled(model: NetworkModel, x_scaled: np.ndarray) -> np.ndarray:
    """Batch forward pass in scaled space; returns shape (rows,)."""
    h = np.atleast_2d(x_scaled)
    n_layers = len(model.weights)
    for l, w in enumerate(model.weights):
        aug = np.hstack([h, np.ones((h.shape[0], 1))])
        z = aug @ w.T
        act = model.hidden_activation if l < n_layers - 1 else model.output_activation
        h = ACTIVATIONS[act][0](z)
    return h[:, 0]


def forward(model: NetworkModel, inputs: np.ndarray) -> float:
    """Evaluate one input row; scaling in, network, target scaling out."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape != (model.n_inputs,):
        raise DimensionMismatch(
            f"input has shape {x.shape}, model expects ({model.n_inputs},)"
        )
    return float(predict(model, x[None, :])[0])


def predict(model: NetworkModel, inputs: np.ndarray) -> np.ndarray:
    """Vectorized forward pass over rows of ``inputs`` (original units)."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if x.shape[1] != model.n_inputs:
        raise DimensionMismatch(
            f"input rows have width {x.shape[1]}, model expects {model.n_inputs}"
        )
    if model.input_scaling is not None:
        x = model.input_scaling.apply(x)
    out = _forward_scaled(model, x)
    if model.output_scaling is not None:
        out = model.output_scaling.invert(out)
    return out


# ---------------------------------------------------------------------------
# Training configuration and splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Training regime: cycles, stop criterion, rate, restarts, split."""

    cycles: int = 1000
    stop_error: float = 0.10
    learning_rate: float = 0.10
    restarts: int = 5000
    rng_seed: int = 0
    split: float = 0.60
    hidden_size: int | None = None

    def __post_init__(self):
        if not 0.0 < self.stop_error < 1.0:
            raise ValueError(f"stop_error must be in (0, 1), got {self.stop_error}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.55 <= self.split <= 0.70:
            raise ValueError(f"split must be in [0.55, 0.70], got {self.split}")
        if self.cycles < 1 or self.restarts < 1:
            raise ValueError("cycles and restarts must be positive")
        if self.hidden_size is not None and self.hidden_size < 1:
            raise ValueError(f"hidden_size must be positive, got {self.hidden_size}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, rng_seed=int(seed))


MIN_SPLIT_ROWS = 20
MAX_TEST_FRACTION = 0.45


def split(matrix: TrainingMatrix, cfg: TrainConfig) -> tuple[TrainingMatrix, TrainingMatrix]:
    """Chronological split: the earliest rows train, the rest test.

    No shuffling; the test share is capped at 45% of the rows.
    """
    n = matrix.rows
    if n < MIN_SPLIT_ROWS:
        raise TooFewRows(f"need at least {MIN_SPLIT_ROWS} rows to split, got {n}")
    n_train = int(np.floor(cfg.split * n))
    min_train = int(np.ceil((1.0 - MAX_TEST_FRACTION) * n))
    n_train = max(n_train, min_train)
    n_train = min(n_train, n - 1)
    return matrix.slice_rows(0, n_train), matrix.slice_rows(n_train, n)


# ---------------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------------


def _epoch_math(weights, hidden_act, output_act, aug0, y_scaled):
    """Fused forward + backward over one full batch.

    ``aug0`` is the input matrix with the bias column already appended.
    Returns (loss, grads, scaled MAE); loss is the half mean squared error
    in scaled space.
    """
    n_layers = len(weights)
    n = aug0.shape[0]
    augs = [aug0]
    zs = []
    h = None
    for l, w in enumerate(weights):
        z = augs[l] @ w.T
        act = hidden_act if l < n_layers - 1 else output_act
        h = ACTIVATIONS[act][0](z)
        zs.append(z)
        if l < n_layers - 1:
            augs.append(np.hstack([h, np.ones((n, 1))]))

    err = h[:, 0] - y_scaled
    loss = 0.5 * float(np.mean(err * err))
    mae = float(np.mean(np.abs(err)))

    grads = [None] * n_layers
    delta = (err[:, None] / n) * ACTIVATIONS[output_act][1](zs[-1])
    for l in range(n_layers - 1, -1, -1):
        grads[l] = delta.T @ augs[l]
        if l > 0:
            back = delta @ weights[l][:, :-1]
            delta = back * ACTIVATIONS[hidden_act][1](zs[l - 1])
    return loss, grads, mae


def _augment(x_scaled: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x_scaled)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _loss_and_grads(model: NetworkModel, x_scaled, y_scaled, want_grads=True):
    """Half-MSE loss in scaled space and its weight gradients."""
    loss, grads, _ = _epoch_math(
        list(model.weights),
        model.hidden_activation,
        model.output_activation,
        _augment(x_scaled),
        y_scaled,
    )
    return (loss, grads) if want_grads else (loss, None)


def _init_weights(n_inputs: int, cfg: TrainConfig, rng: np.random.Generator):
    hidden = cfg.hidden_size if cfg.hidden_size is not None else n_inputs
    sizes = (n_inputs, hidden, 1)
    weights = [
        rng.uniform(-_INIT_WEIGHT_RANGE, _INIT_WEIGHT_RANGE, size=(sizes[l + 1], sizes[l] + 1))
        for l in range(len(sizes) - 1)
    ]
    return sizes, weights


def gradient_descent_epoch(model: NetworkModel, x_scaled, y_scaled, learning_rate: float):
    """One full-batch update; returns (candidate model, pre-update loss)."""
    loss, grads = _loss_and_grads(model, x_scaled, y_scaled)
    new_weights = tuple(w - learning_rate * g for w, g in zip(model.weights, grads))
    return replace(model, weights=new_weights), loss


@dataclass(frozen=True)
class _Prepared:
    """Scaled training batch shared by every restart on one matrix."""

    aug0: np.ndarray
    y_scaled: np.ndarray
    input_scaling: AffineMap
    output_scaling: AffineMap
    n_inputs: int


def _prepare(train_data: TrainingMatrix) -> _Prepared:
    y = train_data.output
    if float(y.max() - y.min()) == 0.0:
        raise ConstantOutput("output column is constant; nothing to fit")
    input_scaling = AffineMap.fit_minmax(train_data.inputs)
    output_scaling = AffineMap.fit_minmax(y[:, None])
    return _Prepared(
        aug0=_augment(input_scaling.apply(train_data.inputs)),
        y_scaled=output_scaling.apply(y[:, None])[:, 0],
        input_scaling=input_scaling,
        output_scaling=output_scaling,
        n_inputs=train_data.n_inputs,
    )


def _train_prepared(prep: _Prepared, cfg: TrainConfig, seed: int,
                    history: list | None = None) -> NetworkModel:
    """Training loop on a prepared batch; one fused pass per epoch.

    The gradient computed at an accepted candidate is reused for the next
    step, so each epoch costs a single forward+backward. Rejected steps
    keep the current weights and gradient and halve the rate, which makes
    the loss trace non-increasing by construction. The stop criterion
    (training MAE below ``stop_error`` of the output range) is evaluated
    on each accepted candidate; scaled MAE / 2 equals range-normalized MAE
    because targets are scaled onto [-1, 1].
    """
    rng = np.random.default_rng(seed)
    sizes, weights = _init_weights(prep.n_inputs, cfg, rng)
    hidden_act, output_act = "tanh", "identity"

    loss, grads, _ = _epoch_math(weights, hidden_act, output_act, prep.aug0, prep.y_scaled)
    if not np.isfinite(loss):
        raise DivergedTraining("initial loss is non-finite")

    lr = cfg.learning_rate
    for _ in range(cfg.cycles):
        candidate = [w - lr * g for w, g in zip(weights, grads)]
        c_loss, c_grads, c_mae = _epoch_math(
            candidate, hidden_act, output_act, prep.aug0, prep.y_scaled
        )
        if np.isfinite(c_loss) and c_loss <= loss:
            weights, loss, grads = candidate, c_loss, c_grads
            lr = cfg.learning_rate
            if history is not None:
                history.append(loss)
            if c_mae / 2.0 < cfg.stop_error:
                break
        else:
            lr *= 0.5
            if history is not None:
                history.append(loss)
            if lr < _MIN_LEARNING_RATE:
                break
    return NetworkModel(
        layer_sizes=sizes,
        weights=tuple(weights),
        hidden_activation=hidden_act,
        output_activation=output_act,
        input_scaling=prep.input_scaling,
        output_scaling=prep.output_scaling,
    )


def train(
    train_data: TrainingMatrix,
    cfg: TrainConfig,
    seed: int | None = None,
    history: list | None = None,
) -> NetworkModel:
    """Fit one network on the training rows.

    Runs up to ``cfg.cycles`` full-batch epochs; an epoch that would raise
    the loss is rejected and the step halved, so the loss trace is
    non-increasing. Stops early once the training MAE falls below
    ``cfg.stop_error`` of the output range. Same seed + same data give
    bit-identical weights. Pass a list as ``history`` to capture the
    post-epoch loss trace.
    """
    prep = _prepare(train_data)
    return _train_prepared(prep, cfg, cfg.rng_seed if seed is None else int(seed), history)


# ---------------------------------------------------------------------------
# Multi-restart search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RestartResult:
    """One restart's trained model, its out-of-sample score, and its seed."""

    model: NetworkModel
    score: object  # float or the PERFECT_STRATEGY sentinel
    seed: int


def restart_seeds(master_seed: int, restarts: int) -> np.ndarray:
    """Deterministic per-restart seeds derived from one master seed."""
    return np.random.SeedSequence(int(master_seed)).generate_state(restarts)


def multi_restart_train(matrix: TrainingMatrix, cfg: TrainConfig, scorer) -> list[RestartResult]:
    """Train ``cfg.restarts`` independently seeded networks and rank them.

    ``scorer(model, train_part, test_part)`` returns the out-of-sample
    score (higher is better; the perfect-strategy sentinel ranks first).
    Restarts whose training diverges are skipped; if none finish,
    AllDiverged is raised. The returned list is sorted by descending
    score with the seed as a deterministic tiebreak.
    """
    train_part, test_part = split(matrix, cfg)
    prep = _prepare(train_part)
    results: list[RestartResult] = []
    for s in restart_seeds(cfg.rng_seed, cfg.restarts):
        try:
            model = _train_prepared(prep, cfg, seed=int(s))
        except DivergedTraining:
            continue
        score = scorer(model, train_part, test_part)
        results.append(RestartResult(model=model, score=score, seed=int(s)))
    if not results:
        raise AllDiverged(f"all {cfg.restarts} restarts diverged")
    results.sort(key=lambda r: (-ism_sort_key(r.score), r.seed))
    return results


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def gradient_check(model: NetworkModel, sample: tuple[np.ndarray, float],
                   epsilon: float = 1e-5) -> float:
    """Max relative gap between analytic and central-difference gradients.

    ``sample`` is one (inputs, target) pair in original units; the loss is
    the scaled-space half squared error the trainer minimizes.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in [1e-7, 1e-3], got {epsilon}")
    x, y = sample
    x = np.asarray(x, dtype=np.float64)[None, :]
    x_scaled = model.input_scaling.apply(x) if model.input_scaling else x
    y_arr = np.asarray([y], dtype=np.float64)
    y_scaled = (
        model.output_scaling.apply(y_arr[:, None])[:, 0]
        if model.output_scaling
        else y_arr
    )

    _, grads = _loss_and_grads(model, x_scaled, y_scaled)

    def loss_with_bump(layer, idx, bump):
        weights = [w.copy() for w in model.weights]
        weights[layer][idx] += bump
        bumped = replace(model, weights=tuple(weights))
        return _loss_and_grads(bumped, x_scaled, y_scaled, want_grads=False)[0]

    worst = 0.0
    for l, w in enumerate(model.weights):
        for idx in np.ndindex(w.shape):
            up = loss_with_bump(l, idx, epsilon)
            down = loss_with_bump(l, idx, -epsilon)
            numeric = (up - down) / (2 * epsilon)
            analytic = grads[l][idx]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# Serialization (versioned JSON; floats round-trip bit-exactly)
# ---------------------------------------------------------------------------


def model_to_dict(model: NetworkModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "hidden_activation": model.hidden_activation,
        "output_activation": model.output_activation,
        "weights": [w.tolist() for w in model.weights],
        "input_scaling": _scaling_to_dict(model.input_scaling),
        "output_scaling": _scaling_to_dict(model.output_scaling),
    }


def model_from_dict(data: dict) -> NetworkModel:
    if data.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document")
    if data.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {data.get('version')}")
    return NetworkModel(
        layer_sizes=tuple(data["layer_sizes"]),
        weights=tuple(np.asarray(w, dtype=np.float64) for w in data["weights"]),
        hidden_activation=data["hidden_activation"],
        output_activation=data["output_activation"],
        input_scaling=_scaling_from_dict(data["input_scaling"]),
        output_scaling=_scaling_from_dict(data["output_scaling"]),
    )


def _scaling_to_dict(scaling: AffineMap | None) -> dict | None:
    if scaling is None:
        return None
    return {"scale": scaling.scale.tolist(), "offset": scaling.offset.tolist()}


def _scaling_from_dict(data: dict | None) -> AffineMap | None:
    if data is None:
        return None
    return AffineMap(np.asarray(data["scale"]), np.asarray(data["offset"]))


def save_model(model: NetworkModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1), encoding="utf-8")


def load_model(path: str | Path) -> NetworkModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
