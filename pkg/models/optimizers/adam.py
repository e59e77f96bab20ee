import numpy as np

from models.network_params import NetworkParams

__all__ = [
    "Adam",
]


class Adam:
    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    # <editor-fold desc="Hyperparameters">
    @property
    def lr(self) -> float:
        return self._lr

    @lr.setter
    def lr(self, value: float):
        if not value > 0:
            raise ValueError("Learning rate must be positive!")
        self._lr = float(value)

    @property
    def beta1(self) -> float:
        return self._beta1

    @beta1.setter
    def beta1(self, value: float):
        if not 0 <= value < 1:
            raise ValueError("beta1 must be in [0, 1)!")
        self._beta1 = float(value)

    @property
    def beta2(self) -> float:
        return self._beta2

    @beta2.setter
    def beta2(self, value: float):
        if not 0 <= value < 1:
            raise ValueError("beta2 must be in [0, 1)!")
        self._beta2 = float(value)

    # </editor-fold>

    def step(self, params: NetworkParams) -> None:
        """
        One bias-corrected Adam update of every parameter from its accumulated gradient; increments the step counter
        """
        params.step += 1
        first_correction = 1.0 - self.beta1 ** params.step
        second_correction = 1.0 - self.beta2 ** params.step

        for name, value in params.values.items():
            gradient = params.grads[name]
            first = params.first_moments[name]
            second = params.second_moments[name]

            first *= self.beta1
            first += (1.0 - self.beta1) * gradient
            second *= self.beta2
            second += (1.0 - self.beta2) * (gradient * gradient)

            denominator = np.sqrt(second / second_correction) + self.eps
            value -= (self.lr / first_correction) * first / denominator
