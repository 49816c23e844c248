"""
Training and querying of the MLP and CNN attackers.

Training is seed-deterministic: initialization and batch order are drawn from `spec.seed`, and the computation is
single-threaded numpy. Multi-threaded BLAS builds may reorder float reductions, in which case runs are no longer
bit-identical.
"""

import logging

import numpy as np
from pydantic import ValidationError

from app.classifiers.layers import ACTIVATIONS, AvgPool1D, Conv1D, Dense, Layer, Reshape
from app.classifiers.models import ClassifierModel, ClassifierSpec, CnnSpec, MlpSpec
from app.classifiers.network import Network, cross_entropy_from_logits
from app.classifiers.optimizer import RMSprop
from app.dataset.models import Dataset
from app.errors import TrainingError
from app.utils import progress

logger = logging.getLogger(__name__)


def build_network(spec: ClassifierSpec, input_length: int, rng: np.random.Generator) -> Network:
    dtype = np.dtype(spec.precision)
    activation = ACTIVATIONS[spec.activation]
    layers: list[Layer] = []
    if isinstance(spec, MlpSpec):
        width = input_length
        dense_widths = spec.hidden_widths
    else:
        layers.append(Reshape((1, input_length)))
        channels, length = 1, input_length
        for block in spec.conv_blocks:
            layers += [Conv1D(channels, block.filters, block.kernel_length, rng, dtype), activation()]
            layers.append(AvgPool1D(block.pool_length))
            channels, length = block.filters, length // block.pool_length
        layers.append(Reshape((-1,)))
        width = channels * length
        dense_widths = spec.dense_widths
    for hidden in dense_widths:
        layers += [Dense(width, hidden, rng, dtype), activation()]
        width = hidden
    layers.append(Dense(width, spec.n_classes, rng, dtype))
    return Network(layers, dtype=dtype)


def _checked_spec(spec: ClassifierSpec, input_length: int) -> ClassifierSpec:
    if not isinstance(spec, CnnSpec):
        return spec
    try:
        return CnnSpec.model_validate(spec.model_dump() | {"input_length": input_length})
    except ValidationError as e:
        raise TrainingError(f"CNN architecture does not fit traces of {input_length} samples: {e}") from e


def initialize(spec: ClassifierSpec, input_length: int) -> ClassifierModel:
    """Untrained model, weights drawn from `spec.seed`."""
    spec = _checked_spec(spec, input_length)
    network = build_network(spec, input_length, np.random.default_rng(spec.seed))
    return ClassifierModel(spec=spec, network=network, input_length=input_length)


def train(dataset: Dataset, spec: ClassifierSpec) -> ClassifierModel:
    """Fit an attacker on a standardized profiling dataset with RMSprop and softmax cross-entropy.

    Args:
        dataset (Dataset): Standardized profiling dataset.
        spec (ClassifierSpec): Architecture and training hyper-parameters.

    Raises:
        TrainingError: Unstandardized dataset, labels out of range, architecture mismatch or non-finite loss.

    Returns:
        ClassifierModel: Trained model referencing the dataset's standardization statistics.
    """
    if not dataset.standardized:
        raise TrainingError("the profiling dataset must be standardized before training")
    if len(dataset) and int(dataset.labels.max()) >= spec.n_classes:
        raise TrainingError(f"labels exceed the {spec.n_classes} output classes of the {spec.kind.upper()}")

    spec = _checked_spec(spec, dataset.n)
    rng = np.random.default_rng(spec.seed)
    network = build_network(spec, dataset.n, rng)
    optimizer = RMSprop(network.params, spec.learning_rate)
    X = dataset.traces.astype(network.dtype)
    y = dataset.labels.astype(np.int64)

    training_log: list[float] = []
    for epoch in progress(range(spec.epochs), desc=f"train {spec.kind}"):
        order = rng.permutation(len(dataset))
        total = 0.0
        for start in range(0, len(dataset), spec.batch_size):
            batch = order[start : start + spec.batch_size]
            loss, grad = cross_entropy_from_logits(network.forward(X[batch]), y[batch])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}: lower the learning rate (currently {spec.learning_rate:g})"
                )
            network.backward(grad)
            optimizer.step(network.grads)
            total += loss * len(batch)
        training_log.append(total / max(1, len(dataset)))
        logger.debug(f"{spec.kind.upper()} epoch {epoch + 1}/{spec.epochs}: loss {training_log[-1]:.5f}")

    if training_log:
        logger.info(f"Trained {spec.kind.upper()} on {len(dataset)} traces, final loss {training_log[-1]:.5f}")
    return ClassifierModel(
        spec=spec, network=network, input_length=dataset.n, stats=dataset.stats, training_log=training_log
    )


def predict(model: ClassifierModel, trace: np.ndarray) -> np.ndarray:
    """Prediction vector of one standardized trace.

    Raises:
        TrainingError: Trace length differs from the model's input length.
    """
    trace = np.asarray(trace)
    if trace.shape != (model.input_length,):
        raise TrainingError(f"expected a trace of {model.input_length} samples, got shape {trace.shape}")
    return model.predict_proba(trace[None, :])[0]


def gradient_check(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between backpropagated gradients and central finite differences over all weights.

    The network is built in double precision whatever `spec.precision`.
    Relative error = |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    spec = _checked_spec(spec.model_copy(update={"precision": "float64"}), X.shape[1])
    network = build_network(spec, X.shape[1], np.random.default_rng(spec.seed))

    _, grad = cross_entropy_from_logits(network.forward(X), y)
    network.backward(grad)
    analytic = [g.copy() for g in network.grads]

    worst = 0.0
    for param, param_grad in zip(network.params, analytic):
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + h
            loss_plus, _ = cross_entropy_from_logits(network.forward(X, cache=False), y)
            param[index] = original - h
            loss_minus, _ = cross_entropy_from_logits(network.forward(X, cache=False), y)
            param[index] = original
            numeric = (loss_plus - loss_minus) / (2 * h)
            error = abs(param_grad[index] - numeric) / max(abs(param_grad[index]), abs(numeric), 1e-6)
            worst = max(worst, float(error))
    return worst


def shift_agreement(model: ClassifierModel, traces: np.ndarray, shift: int) -> float:
    """Fraction of traces whose predicted class survives a circular shift by `shift` samples."""
    traces = np.asarray(traces)
    before = model.predict_proba(traces).argmax(axis=1)
    after = model.predict_proba(np.roll(traces, shift, axis=1)).argmax(axis=1)
    return float((before == after).mean())
