"""Loss computation, optimizers, and the deterministic mini-batch training loop.

The cost function is normalized MSE: squared error measured in the space of
targets standardized by statistics fitted on the training split only. A
model that always predicts the training-set mean therefore scores exactly 1.

Training runs a fixed number of epochs over seeded-shuffle mini-batches
(the final short batch is kept); there is no early stopping and no learning
rate schedule. Validation data is touched only to log its loss.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .errors import (
    DivergedLoss,
    EmptyTrainingSet,
    InvalidSpec,
    ShapeMismatch,
    StateShapeMismatch,
    Underdetermined,
)
from .numerics import RngStream, Scaler, standardize_apply, standardize_fit, standardize_invert

OPTIMIZER_KINDS = ("sgd", "adam", "rmsprop")

RIDGE_JITTER = 1e-8


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.9
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise InvalidSpec(f"unknown optimizer {self.kind!r}")
        if self.learning_rate <= 0:
            raise InvalidSpec("learning rate must be positive")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int
    epochs: int
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise InvalidSpec("batch_size and epochs must be >= 1")


@dataclass(frozen=True)
class TrainLog:
    """Per-epoch training and validation losses (normalized MSE)."""

    train_loss: tuple[float, ...]
    val_loss: tuple[float, ...]


def train_log_to_csv(log: TrainLog, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, (tr, va) in enumerate(zip(log.train_loss, log.val_loss), start=1):
            writer.writerow([epoch, repr(tr), repr(va)])


@dataclass
class OptState:
    kind: str
    t: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def init_opt_state(params: dict[str, np.ndarray], config: OptimizerConfig) -> OptState:
    def zeros():
        return {name: np.zeros_like(arr) for name, arr in params.items()}

    if config.kind == "sgd":
        return OptState(kind="sgd", t=0, m={}, v={})
    if config.kind == "rmsprop":
        # m holds the squared-gradient accumulator; v is unused
        return OptState(kind="rmsprop", t=0, m=zeros(), v={})
    return OptState(kind="adam", t=0, m=zeros(), v=zeros())


def step(
    state: OptState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    config: OptimizerConfig,
) -> dict[str, np.ndarray]:
    """Apply one optimizer update in place and return the parameters."""
    if state.kind != config.kind:
        raise StateShapeMismatch(
            f"state built for {state.kind!r}, config is {config.kind!r}"
        )
    for name, p in params.items():
        if name not in grads or grads[name].shape != p.shape:
            raise StateShapeMismatch(f"gradient missing or misshaped for {name!r}")
    state.t += 1
    lr = config.learning_rate
    if config.kind == "sgd":
        for name, p in params.items():
            p -= lr * grads[name]
        return params
    if config.kind == "rmsprop":
        for name, p in params.items():
            v = state.m[name]
            if v.shape != p.shape:
                raise StateShapeMismatch(f"optimizer state misshaped for {name!r}")
            v *= config.rho
            v += (1.0 - config.rho) * grads[name] ** 2
            p -= lr * grads[name] / (np.sqrt(v) + config.eps)
        return params
    # adam with bias-corrected moments
    bc1 = 1.0 - config.beta1**state.t
    bc2 = 1.0 - config.beta2**state.t
    for name, p in params.items():
        m, v = state.m[name], state.v[name]
        if m.shape != p.shape:
            raise StateShapeMismatch(f"optimizer state misshaped for {name!r}")
        m *= config.beta1
        m += (1.0 - config.beta1) * grads[name]
        v *= config.beta2
        v += (1.0 - config.beta2) * grads[name] ** 2
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
    return params


def loss_normalized_mse(pred, truth, scaler: Scaler) -> float:
    """Mean squared error over all entries, in scaler-standardized target space."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs truth {truth.shape}")
    zp = standardize_apply(scaler, pred)
    zt = standardize_apply(scaler, truth)
    return float(np.mean((zp - zt) ** 2))


@dataclass(frozen=True)
class TrainSet:
    """Raw-unit examples: x is (n, F) frames or (n, t, F) windows."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.ndim not in (2, 3) or self.y.ndim != 2:
            raise ShapeMismatch("x must be (n, F) or (n, t, F); y must be (n, F_out)")
        if self.x.shape[0] != self.y.shape[0]:
            raise ShapeMismatch("x and y disagree on the example count")

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass
class TrainedModel:
    """Frozen weights plus everything needed to reproduce and apply them."""

    network: nn.Network
    input_scaler: Scaler
    output_scaler: Scaler
    init_seed: int
    shuffle_seed: int
    log: TrainLog | None = None

    @property
    def spec(self) -> nn.NetworkSpec:
        return self.network.spec


def _fit_input_scaler(x: np.ndarray) -> Scaler:
    flat = x.reshape(-1, x.shape[-1]) if x.ndim == 3 else x
    return standardize_fit(flat)


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean((a - b) ** 2))


def _freeze(net: nn.Network) -> nn.Network:
    return nn.Network(
        spec=net.spec,
        params={name: arr.copy() for name, arr in net.params.items()},
        version=net.version,
    )


def train(
    net: nn.Network,
    train_set: TrainSet,
    val_set: TrainSet | None,
    opt: OptimizerConfig,
    tc: TrainConfig,
    rng: RngStream,
) -> tuple[TrainedModel, TrainLog]:
    """Mini-batch training with seeded shuffling and exactly `tc.epochs` passes.

    Scalers are fitted on `train_set` only; `val_set` reuses them and is
    consulted solely for the per-epoch validation loss. Raises DivergedLoss
    as soon as any loss turns non-finite.
    """
    if train_set.n == 0:
        raise EmptyTrainingSet("training set has no examples")
    input_scaler = _fit_input_scaler(train_set.x)
    output_scaler = standardize_fit(train_set.y)
    xs = standardize_apply(input_scaler, train_set.x)
    ys = standardize_apply(output_scaler, train_set.y)
    if val_set is not None:
        xv = standardize_apply(input_scaler, val_set.x)
        yv = standardize_apply(output_scaler, val_set.y)

    state = init_opt_state(net.params, opt)
    shuffle_rng = RngStream(tc.shuffle_seed)
    dropout_rng = rng.child(0)
    n = train_set.n

    train_losses: list[float] = []
    val_losses: list[float] = []
    for _epoch in range(tc.epochs):
        perm = shuffle_rng.permutation(n)
        sq_sum = 0.0
        for start in range(0, n, tc.batch_size):
            idx = perm[start : start + tc.batch_size]
            xb, yb = xs[idx], ys[idx]
            out, cache = nn.forward_training(net, xb, rng=dropout_rng)
            batch_loss = _mse(out, yb)
            if not np.isfinite(batch_loss):
                raise DivergedLoss(f"training loss became {batch_loss}")
            sq_sum += batch_loss * len(idx)
            dy = 2.0 * (out - yb) / out.size
            grads = nn.backward(net, cache, dy)
            step(state, net.params, grads, opt)
            net.version += 1
        train_losses.append(sq_sum / n)
        if val_set is not None:
            val_loss = _mse(nn.forward(net, xv), yv)
            if not np.isfinite(val_loss):
                raise DivergedLoss(f"validation loss became {val_loss}")
            val_losses.append(val_loss)
        else:
            val_losses.append(float("nan"))

    log = TrainLog(train_loss=tuple(train_losses), val_loss=tuple(val_losses))
    model = TrainedModel(
        network=_freeze(net),
        input_scaler=input_scaler,
        output_scaler=output_scaler,
        init_seed=rng.seed,
        shuffle_seed=tc.shuffle_seed,
        log=log,
    )
    return model, log


def fit_linear(train_set: TrainSet) -> TrainedModel:
    """Closed-form least squares with intercept on standardized data.

    A ridge jitter keeps the normal equations solvable when feature columns
    are duplicated or otherwise rank-deficient.
    """
    x, y = train_set.x, train_set.y
    if x.ndim != 2:
        raise ShapeMismatch("fit_linear expects per-frame feature rows, not windows")
    n, f_in = x.shape
    if n < f_in + 1:
        raise Underdetermined(f"{n} rows cannot determine {f_in}+1 coefficients")
    input_scaler = standardize_fit(x)
    output_scaler = standardize_fit(y)
    xs = standardize_apply(input_scaler, x)
    ys = standardize_apply(output_scaler, y)
    xa = np.column_stack([xs, np.ones(n)])
    gram = xa.T @ xa + RIDGE_JITTER * np.eye(f_in + 1)
    coef = np.linalg.solve(gram, xa.T @ ys)
    spec = nn.NetworkSpec(arch="linear", input_dim=f_in, output_dim=y.shape[1])
    network = nn.Network(spec=spec, params={"out.W": coef[:-1], "out.b": coef[-1]})
    return TrainedModel(
        network=network,
        input_scaler=input_scaler,
        output_scaler=output_scaler,
        init_seed=0,
        shuffle_seed=0,
        log=None,
    )


def predict(model: TrainedModel, x) -> np.ndarray:
    """Apply the frozen model to raw-unit inputs, returning raw-unit outputs."""
    zs = standardize_apply(model.input_scaler, np.asarray(x, dtype=np.float64))
    zy = nn.forward(model.network, zs)
    return standardize_invert(model.output_scaler, zy)


# ---------------------------------------------------------------------------
# model serialization (network + scalers + provenance, versioned JSON)
# ---------------------------------------------------------------------------

MODEL_FORMAT_VERSION = 1


def _scaler_to_dict(scaler: Scaler) -> dict:
    return {
        "mean": scaler.mean.tolist(),
        "sd": scaler.sd.tolist(),
        "degenerate": [bool(v) for v in scaler.degenerate],
    }


def _scaler_from_dict(payload: dict) -> Scaler:
    return Scaler(
        mean=np.array(payload["mean"], dtype=np.float64),
        sd=np.array(payload["sd"], dtype=np.float64),
        degenerate=np.array(payload["degenerate"], dtype=bool),
    )


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "network": nn.network_to_dict(model.network),
        "input_scaler": _scaler_to_dict(model.input_scaler),
        "output_scaler": _scaler_to_dict(model.output_scaler),
        "init_seed": model.init_seed,
        "shuffle_seed": model.shuffle_seed,
        "log": None
        if model.log is None
        else {"train_loss": list(model.log.train_loss), "val_loss": list(model.log.val_loss)},
    }


def model_from_dict(payload: dict) -> TrainedModel:
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise InvalidSpec(f"unsupported model format {payload.get('format_version')!r}")
    log = payload.get("log")
    return TrainedModel(
        network=nn.network_from_dict(payload["network"]),
        input_scaler=_scaler_from_dict(payload["input_scaler"]),
        output_scaler=_scaler_from_dict(payload["output_scaler"]),
        init_seed=payload["init_seed"],
        shuffle_seed=payload["shuffle_seed"],
        log=None
        if log is None
        else TrainLog(train_loss=tuple(log["train_loss"]), val_loss=tuple(log["val_loss"])),
    )


def save_model(model: TrainedModel, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> TrainedModel:
    with open(Path(path)) as fh:
        return model_from_dict(json.load(fh))
