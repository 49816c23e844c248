import numpy as np


class RMSprop:
    """RMSprop: running average of squared gradients scales each parameter's step."""

    def __init__(self, params: list[np.ndarray], learning_rate: float, decay: float = 0.9, epsilon: float = 1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self.cache = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        for p, g, c in zip(self.params, grads, self.cache):
            c *= self.decay
            c += (1.0 - self.decay) * g**2
            p -= self.learning_rate * g / (np.sqrt(c) + self.epsilon)
