"""
Layers of the from-scratch attackers. Every layer caches what its backward pass needs, and exposes its parameters and
their gradients as parallel lists (`params`, `grads`) for the optimizer. A forward pass with `cache=False` writes no
layer state, so inference may run from several threads.

Convolutions are 1-D, 'same'-padded, over (batch, channels, length) inputs.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    def __init__(self):
        self.params: list[np.ndarray] = []
        self.grads: list[np.ndarray] = []

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.W = glorot_uniform(rng, (in_features, out_features), in_features, out_features, dtype)
        self.b = np.zeros(out_features, dtype=dtype)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self.params = [self.W, self.b]
        self.grads = [self.dW, self.db]
        self.x_cache: np.ndarray | None = None

    def forward(self, x, cache=True):
        if cache:
            self.x_cache = x
        return x @ self.W + self.b

    def backward(self, grad_output):
        self.dW[...] = self.x_cache.T @ grad_output
        self.db[...] = grad_output.sum(axis=0)
        return grad_output @ self.W.T


class ReLU(Layer):
    def forward(self, x, cache=True):
        mask = x > 0
        if cache:
            self.mask = mask
        return x * mask

    def backward(self, grad_output):
        return grad_output * self.mask


class Tanh(Layer):
    def forward(self, x, cache=True):
        out = np.tanh(x)
        if cache:
            self.out = out
        return out

    def backward(self, grad_output):
        return grad_output * (1.0 - self.out**2)


class Sigmoid(Layer):
    def forward(self, x, cache=True):
        out = 1.0 / (1.0 + np.exp(-x))
        if cache:
            self.out = out
        return out

    def backward(self, grad_output):
        return grad_output * self.out * (1.0 - self.out)


ACTIVATIONS: dict[str, type[Layer]] = {"relu": ReLU, "tanh": Tanh, "sigmoid": Sigmoid}


class Conv1D(Layer):
    def __init__(self, in_channels: int, filters: int, kernel_length: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.kernel_length = kernel_length
        self.pad_left = (kernel_length - 1) // 2
        self.pad_right = kernel_length - 1 - self.pad_left
        fan_in, fan_out = in_channels * kernel_length, filters * kernel_length
        self.W = glorot_uniform(rng, (filters, in_channels, kernel_length), fan_in, fan_out, dtype)
        self.b = np.zeros(filters, dtype=dtype)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self.params = [self.W, self.b]
        self.grads = [self.dW, self.db]

    def forward(self, x, cache=True):
        padded = np.pad(x, ((0, 0), (0, 0), (self.pad_left, self.pad_right)))
        windows = sliding_window_view(padded, self.kernel_length, axis=2)  # (B, C, L, K)
        if cache:
            self.windows = windows
        return np.einsum("bclk,fck->bfl", windows, self.W, optimize=True) + self.b[None, :, None]

    def backward(self, grad_output):
        self.dW[...] = np.einsum("bclk,bfl->fck", self.windows, grad_output, optimize=True)
        self.db[...] = grad_output.sum(axis=(0, 2))
        batch, channels, length, _ = self.windows.shape
        grad_padded = np.zeros((batch, channels, length + self.kernel_length - 1), dtype=grad_output.dtype)
        for k in range(self.kernel_length):
            grad_padded[:, :, k : k + length] += np.einsum("bfl,fc->bcl", grad_output, self.W[:, :, k], optimize=True)
        return grad_padded[:, :, self.pad_left : self.pad_left + length]


class AvgPool1D(Layer):
    """Average pooling with stride = pool length; a trailing remainder is dropped."""

    def __init__(self, pool_length: int):
        super().__init__()
        self.pool_length = pool_length

    def forward(self, x, cache=True):
        if cache:
            self.input_shape = x.shape
        out_length = x.shape[2] // self.pool_length
        pooled = x[:, :, : out_length * self.pool_length]
        return pooled.reshape(x.shape[0], x.shape[1], out_length, self.pool_length).mean(axis=3)

    def backward(self, grad_output):
        grad = np.zeros(self.input_shape, dtype=grad_output.dtype)
        spread = np.repeat(grad_output, self.pool_length, axis=2) / self.pool_length
        grad[:, :, : spread.shape[2]] = spread
        return grad


class Reshape(Layer):
    def __init__(self, shape: tuple[int, ...]):
        super().__init__()
        self.shape = shape

    def forward(self, x, cache=True):
        if cache:
            self.input_shape = x.shape
        return x.reshape((x.shape[0], *self.shape))

    def backward(self, grad_output):
        return grad_output.reshape(self.input_shape)
