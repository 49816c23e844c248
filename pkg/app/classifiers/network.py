import numpy as np
from scipy.special import log_softmax, softmax

from app.classifiers.layers import Layer


def cross_entropy_from_logits(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the logits.

    With two classes this is the binary cross-entropy of the class-1 confidence.
    """
    batch = len(y)
    loss = -log_softmax(logits, axis=1)[np.arange(batch), y].mean()
    grad = softmax(logits, axis=1)
    grad[np.arange(batch), y] -= 1.0
    return float(loss), (grad / batch).astype(logits.dtype)


class Network:
    def __init__(self, layers: list[Layer], dtype=np.float32):
        self.layers = layers
        self.dtype = np.dtype(dtype)

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        out = x
        for layer in self.layers:
            out = layer.forward(out, cache)
        return out

    def backward(self, grad_loss: np.ndarray) -> None:
        grad = grad_loss
        for layer in reversed(self.layers):
            grad = layer.backward(grad)

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    @property
    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads]

    def get_weights(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params]

    def set_weights(self, weights: list[np.ndarray]) -> None:
        params = self.params
        if len(weights) != len(params):
            raise ValueError(f"expected {len(params)} weight tensors, got {len(weights)}")
        for p, w in zip(params, weights):
            if p.shape != w.shape:
                raise ValueError(f"weight shape {w.shape} does not match {p.shape}")
            p[...] = w
