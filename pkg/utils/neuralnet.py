"""
Residual multilayer regressor from encoded measurements to canonical EQP vectors.

Architecture (all real, float64):

    h_0 = act(W_in x + b_in)
    h_k = h_{k-1} + W2_k act(W1_k h_{k-1} + b1_k) + b2_k      k = 1..n_blocks
    y   = W_out h_K + b_out

The second affine layer of every residual branch starts at zero, so a fresh
model computes the same function whatever its depth. Gradients are derived
by hand; training uses minibatch Adam with early stopping on validation RMSE.
"""

import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from config.settings import (
    ADAM_BETAS,
    ADAM_EPS,
    BATCH_SIZE,
    EARLY_STOP_PATIENCE,
    EPOCHS,
    LEARNING_RATE,
    NETWORK_ACTIVATION,
    SIGN_WEIGHT,
    TRAIN_VALIDATION_RATIO,
)
from utils.constants import ERROR_FRAME_MISMATCH, MODEL_FORMAT, MODEL_FORMAT_VERSION
from utils.eqp import Reconstruction, negativity, reconstruct
from utils.errors import DatasetIOError, InvalidInputError, TrainingDivergedError
from utils.measurement import MeasurementRecord, ProjectorFrame, encode_input
from utils.qcore import DensityMatrix, PureState, density_from_pure, fidelity, purity

logger = logging.getLogger("eqpbench.neuralnet")

LOSS_KINDS = ("mse", "sign_weighted")


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _softplus_grad(x: np.ndarray) -> np.ndarray:
    return expit(x)


def _silu(x: np.ndarray) -> np.ndarray:
    return x * expit(x)


def _silu_grad(x: np.ndarray) -> np.ndarray:
    s = expit(x)
    return s + x * s * (1.0 - s)


ACTIVATIONS: Dict[str, Tuple[Callable, Callable]] = {
    "softplus": (_softplus, _softplus_grad),
    "silu": (_silu, _silu_grad),
}


@dataclass(frozen=True)
class ModelConfig:
    """
    Shape of a residual model.

    Attributes:
        input_dim: 2 |frame| (values channel + mask channel).
        output_dim: |frame|.
        width: Hidden width.
        n_blocks: Number of residual blocks.
        activation: 'softplus' or 'silu'.
        seed: Initialization seed.
    """

    input_dim: int
    output_dim: int
    width: int
    n_blocks: int
    activation: str = NETWORK_ACTIVATION
    seed: int = 0

    def __post_init__(self):
        if min(self.input_dim, self.output_dim, self.width) < 1:
            raise InvalidInputError("Model dimensions must be positive")
        if self.n_blocks < 0:
            raise InvalidInputError("n_blocks must be non-negative")
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"Unknown activation {self.activation!r}")

    @classmethod
    def for_frame(cls, frame: ProjectorFrame, width: int, n_blocks: int, **kwargs) -> "ModelConfig":
        return cls(input_dim=2 * len(frame), output_dim=len(frame), width=width, n_blocks=n_blocks, **kwargs)


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimization settings.

    Attributes:
        batch_size: Minibatch size.
        learning_rate: Adam step size.
        betas: Adam moment decays.
        epochs: Epoch cap.
        patience: Epochs without validation improvement before stopping.
        loss: 'mse' or 'sign_weighted'.
        w_neg: Weight of squared errors on negative targets for 'sign_weighted'.
        split: Train:validation ratio used when no validation set is given.
    """

    batch_size: int = BATCH_SIZE
    learning_rate: float = LEARNING_RATE
    betas: Tuple[float, float] = ADAM_BETAS
    epochs: int = EPOCHS
    patience: int = EARLY_STOP_PATIENCE
    loss: str = "mse"
    w_neg: float = SIGN_WEIGHT
    split: Tuple[int, int] = TRAIN_VALIDATION_RATIO

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.patience < 1:
            raise InvalidInputError("batch_size, epochs and patience must be at least 1")
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if not all(0.0 <= b < 1.0 for b in self.betas):
            raise InvalidInputError("Adam decays must lie in [0, 1)")
        if self.loss not in LOSS_KINDS:
            raise InvalidInputError(f"Unknown loss {self.loss!r}")
        if self.w_neg <= 0:
            raise InvalidInputError("w_neg must be positive")
        if min(self.split) < 1:
            raise InvalidInputError("Split ratio parts must be at least 1")


@dataclass
class ResidualModel:
    """
    Parameters of a residual regressor.

    ``params`` maps names to arrays: ``W_in``/``b_in``, ``W1_k``/``b1_k``/
    ``W2_k``/``b2_k`` per block, and ``W_out``/``b_out``.
    """

    config: ModelConfig
    params: Dict[str, np.ndarray] = field(repr=False)

    @classmethod
    def initialize(cls, config: ModelConfig, zero_output: bool = False) -> "ResidualModel":
        """
        Fan-in scaled random affine layers; second layer of every branch zero.

        Args:
            config: Model shape.
            zero_output: Also zero the output head.
        """
        rng = np.random.default_rng(config.seed)
        w = config.width

        def affine(n_out: int, n_in: int) -> np.ndarray:
            return rng.normal(0.0, np.sqrt(1.0 / n_in), size=(n_out, n_in))

        # Input and output layers are drawn first so they do not depend on depth
        params = {"W_in": affine(w, config.input_dim), "b_in": np.zeros(w)}
        w_out = affine(config.output_dim, w)
        for k in range(config.n_blocks):
            params[f"W1_{k}"] = affine(w, w)
            params[f"b1_{k}"] = np.zeros(w)
            params[f"W2_{k}"] = np.zeros((w, w))
            params[f"b2_{k}"] = np.zeros(w)
        params["W_out"] = np.zeros_like(w_out) if zero_output else w_out
        params["b_out"] = np.zeros(config.output_dim)
        return cls(config, params)

    def names(self) -> List[str]:
        names = ["W_in", "b_in"]
        for k in range(self.config.n_blocks):
            names += [f"W1_{k}", f"b1_{k}", f"W2_{k}", f"b2_{k}"]
        return names + ["W_out", "b_out"]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[n].ravel() for n in self.names()])

    def set_flat(self, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=float)
        offset = 0
        for name in self.names():
            size = self.params[name].size
            self.params[name] = vector[offset: offset + size].reshape(self.params[name].shape).copy()
            offset += size
        if offset != vector.size:
            raise InvalidInputError(f"Expected {offset} parameters, got {vector.size}")

    def copy(self) -> "ResidualModel":
        return ResidualModel(self.config, {k: v.copy() for k, v in self.params.items()})


def _as_batch(model: ResidualModel, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != model.config.input_dim:
        raise InvalidInputError(
            f"Input has {batch.shape[-1]} features, model expects {model.config.input_dim}"
        )
    return batch, single


def _forward_cache(model: ResidualModel, x: np.ndarray):
    act, _ = ACTIVATIONS[model.config.activation]
    p = model.params
    pre_in = x @ p["W_in"].T + p["b_in"]
    h = act(pre_in)
    blocks = []
    for k in range(model.config.n_blocks):
        u = h @ p[f"W1_{k}"].T + p[f"b1_{k}"]
        z = act(u)
        blocks.append((h, u, z))
        h = h + z @ p[f"W2_{k}"].T + p[f"b2_{k}"]
    y = h @ p["W_out"].T + p["b_out"]
    return y, (pre_in, blocks, h)


def forward(model: ResidualModel, x: np.ndarray) -> np.ndarray:
    """
    Predicted EQP vector(s) for one input vector or a batch (rows).

    Raises:
        InvalidInputError: If the feature count does not match the model.
    """
    batch, single = _as_batch(model, x)
    y, _ = _forward_cache(model, batch)
    return y[0] if single else y


def _loss_weights(target: np.ndarray, kind: str, w_neg: float) -> np.ndarray:
    if kind == "mse":
        return np.ones_like(target)
    if kind == "sign_weighted":
        return np.where(target < 0, w_neg, 1.0)
    raise InvalidInputError(f"Unknown loss {kind!r}")


def loss(pred: np.ndarray, target: np.ndarray, kind: str = "mse", w_neg: float = SIGN_WEIGHT) -> float:
    """
    Mean (weighted) squared error over all entries.

    'sign_weighted' multiplies squared errors by ``w_neg`` where the target is negative.
    """
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise InvalidInputError(f"Prediction shape {pred.shape} differs from target {target.shape}")
    weights = _loss_weights(target, kind, w_neg)
    return float(np.mean(weights * (pred - target) ** 2))


def backward(
    model: ResidualModel,
    x: np.ndarray,
    target: np.ndarray,
    kind: str = "mse",
    w_neg: float = SIGN_WEIGHT,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Loss and its exact gradient with respect to every parameter.

    Returns:
        Tuple (loss value, gradients keyed like ``model.params``).
    """
    batch, single = _as_batch(model, x)
    target = np.asarray(target, dtype=float)
    target = target[None, :] if single else target
    if target.shape != (batch.shape[0], model.config.output_dim):
        raise InvalidInputError(f"Target shape {target.shape} does not match the model output")

    _, act_grad = ACTIVATIONS[model.config.activation]
    p = model.params
    y, (pre_in, blocks, h_last) = _forward_cache(model, batch)

    weights = _loss_weights(target, kind, w_neg)
    diff = y - target
    value = float(np.mean(weights * diff**2))

    grads: Dict[str, np.ndarray] = {}
    dy = 2.0 * weights * diff / diff.size
    grads["W_out"] = dy.T @ h_last
    grads["b_out"] = dy.sum(axis=0)
    dh = dy @ p["W_out"]

    for k in reversed(range(model.config.n_blocks)):
        h_in, u, z = blocks[k]
        grads[f"W2_{k}"] = dh.T @ z
        grads[f"b2_{k}"] = dh.sum(axis=0)
        du = (dh @ p[f"W2_{k}"]) * act_grad(u)
        grads[f"W1_{k}"] = du.T @ h_in
        grads[f"b1_{k}"] = du.sum(axis=0)
        dh = dh + du @ p[f"W1_{k}"]

    da = dh * act_grad(pre_in)
    grads["W_in"] = da.T @ batch
    grads["b_in"] = da.sum(axis=0)
    return value, grads


class AdamOptimizer:
    """Adaptive moment estimation with bias correction, updating parameters in place."""

    def __init__(self, learning_rate: float = LEARNING_RATE, betas: Tuple[float, float] = ADAM_BETAS,
                 eps: float = ADAM_EPS):
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainingHistory:
    """Per-epoch training loss and validation RMSE."""

    train_loss: List[float] = field(default_factory=list)
    val_rmse: List[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def best_val_rmse(self) -> float:
        return self.val_rmse[self.best_epoch] if self.best_epoch >= 0 else float("nan")


def mean_record_rmse(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over rows of the per-row RMSE."""
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target)
    return float(np.mean(np.sqrt(np.mean((pred - target) ** 2, axis=1))))


def split_train_validation(
    inputs: np.ndarray, targets: np.ndarray, ratio: Tuple[int, int], rng: np.random.Generator
) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """Random train/validation split with ``ratio`` (train:validation) parts."""
    n = inputs.shape[0]
    order = rng.permutation(n)
    n_train = int(round(n * ratio[0] / (ratio[0] + ratio[1])))
    n_train = min(max(n_train, 1), n - 1) if n > 1 else n
    train_idx, val_idx = np.sort(order[:n_train]), np.sort(order[n_train:])
    return (inputs[train_idx], targets[train_idx]), (inputs[val_idx], targets[val_idx])


def train(
    dataset: Tuple[np.ndarray, np.ndarray],
    model_config: ModelConfig,
    train_config: TrainConfig,
    rng: np.random.Generator,
    validation: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[ResidualModel, TrainingHistory]:
    """
    Minibatch Adam training with early stopping on validation RMSE.

    Args:
        dataset: (inputs, targets) arrays with one row per record.
        model_config: Shape of the model to train.
        train_config: Optimization settings.
        rng: Generator for the split and minibatch shuffling.
        validation: Explicit validation arrays; otherwise ``dataset`` is
            split by ``train_config.split``.

    Returns:
        Tuple (model with the best validation parameters, history).

    Raises:
        InvalidInputError: On an empty dataset or mismatched dimensions.
        TrainingDivergedError: If the loss becomes non-finite.
    """
    inputs, targets = (np.asarray(a, dtype=float) for a in dataset)
    if inputs.shape[0] == 0:
        raise InvalidInputError("Cannot train on an empty dataset")
    if inputs.shape[0] != targets.shape[0]:
        raise InvalidInputError("Inputs and targets have different row counts")
    if inputs.shape[1] != model_config.input_dim or targets.shape[1] != model_config.output_dim:
        raise InvalidInputError(ERROR_FRAME_MISMATCH)

    if validation is None:
        (train_x, train_y), (val_x, val_y) = split_train_validation(inputs, targets, train_config.split, rng)
    else:
        train_x, train_y = inputs, targets
        val_x, val_y = (np.asarray(a, dtype=float) for a in validation)
    if val_x.shape[0] == 0:
        val_x, val_y = train_x, train_y

    model = ResidualModel.initialize(model_config)
    optimizer = AdamOptimizer(train_config.learning_rate, train_config.betas)
    history = TrainingHistory()
    best = model.copy()
    best_rmse = np.inf
    stale = 0

    logger.info(
        f"Training on {train_x.shape[0]} records, validating on {val_x.shape[0]}",
        extra={"width": model_config.width, "blocks": model_config.n_blocks, "loss": train_config.loss},
    )

    for epoch in range(train_config.epochs):
        order = rng.permutation(train_x.shape[0])
        total, seen = 0.0, 0
        for step, start in enumerate(range(0, len(order), train_config.batch_size)):
            idx = order[start: start + train_config.batch_size]
            value, grads = backward(model, train_x[idx], train_y[idx], train_config.loss, train_config.w_neg)
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"Loss became {value} at epoch {epoch}, step {step}", epoch=epoch, step=step
                )
            optimizer.step(model.params, grads)
            total += value * len(idx)
            seen += len(idx)

        history.train_loss.append(total / seen)
        val_rmse = mean_record_rmse(forward(model, val_x), val_y)
        history.val_rmse.append(val_rmse)

        if val_rmse < best_rmse:
            best_rmse, best, stale = val_rmse, model.copy(), 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= train_config.patience:
                history.stopped_early = True
                logger.info(f"Early stop at epoch {epoch} (best epoch {history.best_epoch})")
                break

        logger.debug(f"Epoch {epoch}: loss={history.train_loss[-1]:.6e} val_rmse={val_rmse:.6e}")

    return best, history


@dataclass(frozen=True, eq=False)
class EQPPrediction:
    """Network prediction for one record plus derived quantities."""

    coeffs: np.ndarray
    negativity: float
    reconstruction: Reconstruction
    purity: float
    fidelity: Optional[float]

    @property
    def density(self) -> DensityMatrix:
        return self.reconstruction.density


def predict_eqp(
    model: ResidualModel,
    record: MeasurementRecord,
    frame: ProjectorFrame,
    reference: Optional[Union[PureState, DensityMatrix]] = None,
) -> EQPPrediction:
    """
    encode_input -> forward -> reconstruct -> fidelity/purity.

    Raises:
        InvalidInputError: If the model was built for a different frame.
    """
    if model.config.input_dim != 2 * len(frame) or model.config.output_dim != len(frame):
        raise InvalidInputError(ERROR_FRAME_MISMATCH)

    coeffs = forward(model, encode_input(record, frame))
    recon = reconstruct(coeffs, frame)
    fid = None
    if reference is not None:
        ref = density_from_pure(reference) if isinstance(reference, PureState) else reference
        fid = fidelity(recon.density, ref)
    return EQPPrediction(coeffs, negativity(coeffs), recon, purity(recon.density), fid)


def save_model(model: ResidualModel, path: Union[str, Path], history: Optional[TrainingHistory] = None) -> None:
    """
    Write a version-tagged archive: JSON header (config, parameter layout) + flat parameters.

    Raises:
        DatasetIOError: If the file cannot be written.
    """
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "config": asdict(model.config),
        "layout": [[name, list(model.params[name].shape)] for name in model.names()],
    }
    if history is not None:
        header["history"] = asdict(history)

    buffer = io.BytesIO()
    np.savez(buffer, header=np.array(json.dumps(header)), params=model.flat())
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(buffer.getvalue())
    except OSError as e:
        raise DatasetIOError(f"Cannot write model {path}: {e}")
    logger.info(f"💾 Model saved to {path}")


def load_model(path: Union[str, Path]) -> ResidualModel:
    """
    Read a model written by ``save_model``.

    Raises:
        DatasetIOError: If the file is missing, unreadable, or not a model archive.
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            header = json.loads(str(archive["header"]))
            flat = np.array(archive["params"], dtype=float)
    except (OSError, KeyError, ValueError) as e:
        raise DatasetIOError(f"Cannot read model {path}: {e}")

    if header.get("format") != MODEL_FORMAT:
        raise DatasetIOError(f"{path} is not an {MODEL_FORMAT} file")
    if header.get("version") != MODEL_FORMAT_VERSION:
        raise DatasetIOError(f"{path} has unsupported model version {header.get('version')}")

    try:
        config = ModelConfig(**header["config"])
    except (TypeError, InvalidInputError) as e:
        raise DatasetIOError(f"{path} has an invalid model header: {e}")

    model = ResidualModel.initialize(config)
    try:
        model.set_flat(flat)
    except (InvalidInputError, ValueError) as e:
        raise DatasetIOError(f"{path} parameters do not match its header: {e}")
    return model
