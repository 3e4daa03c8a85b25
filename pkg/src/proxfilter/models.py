"""Scalar-output regression models with analytic gradients."""

from __future__ import annotations

import math
from typing import Protocol, runtime_checkable

import numpy as np
from numpy.typing import NDArray


@runtime_checkable
class ScalarModel(Protocol):
    """A differentiable map ``theta -> g(x, theta)`` for a fixed input ``x``."""

    name: str

    def n_params(self, n_inputs: int) -> int: ...

    def eval(self, theta: NDArray[np.float64], x: NDArray[np.float64]) -> float: ...

    def grad(self, theta: NDArray[np.float64], x: NDArray[np.float64]) -> NDArray[np.float64]: ...


def _logistic(z: float) -> float:
    # branch on sign so exp never overflows
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _sigmoid_logit(theta: NDArray[np.float64], x: NDArray[np.float64]) -> float:
    if theta.shape[0] != x.shape[0] + 1:
        raise ValueError(
            f"sigmoid model needs dim(theta) == dim(x) + 1, got {theta.shape[0]} and {x.shape[0]}"
        )
    return float(theta[0] + theta[1:] @ x)


def sigmoid_eval(theta: NDArray[np.float64], x: NDArray[np.float64]) -> float:
    """Logistic function of ``alpha + beta' x`` with ``theta = (alpha, beta)``."""
    return _logistic(_sigmoid_logit(theta, x))


def sigmoid_grad(theta: NDArray[np.float64], x: NDArray[np.float64]) -> NDArray[np.float64]:
    z = _sigmoid_logit(theta, x)
    # s(z) * s(-z) == g * (1 - g) without the cancellation in 1 - g
    slope = _logistic(z) * _logistic(-z)
    out = np.empty(x.shape[0] + 1)
    out[0] = slope
    out[1:] = slope * x
    return out


def linear_eval(theta: NDArray[np.float64], x: NDArray[np.float64]) -> float:
    if theta.shape != x.shape:
        raise ValueError(f"linear model needs equal dimensions, got {theta.shape} and {x.shape}")
    return float(x @ theta)


def linear_grad(theta: NDArray[np.float64], x: NDArray[np.float64]) -> NDArray[np.float64]:
    if theta.shape != x.shape:
        raise ValueError(f"linear model needs equal dimensions, got {theta.shape} and {x.shape}")
    return x


class LinearModel:
    name = "linear"

    def n_params(self, n_inputs: int) -> int:
        return n_inputs

    def eval(self, theta, x):
        return linear_eval(theta, x)

    def grad(self, theta, x):
        return linear_grad(theta, x)

    def __repr__(self) -> str:
        return "LinearModel()"


class SigmoidModel:
    """Logistic curve ``1 / (1 + exp(-alpha - beta' x))``; the intercept is ``theta[0]``."""

    name = "sigmoid"

    def n_params(self, n_inputs: int) -> int:
        return n_inputs + 1

    def eval(self, theta, x):
        return sigmoid_eval(theta, x)

    def grad(self, theta, x):
        return sigmoid_grad(theta, x)

    def __repr__(self) -> str:
        return "SigmoidModel()"


MODELS: dict[str, type] = {"linear": LinearModel, "sigmoid": SigmoidModel}


def get_model(model: str | ScalarModel) -> ScalarModel:
    if isinstance(model, str):
        try:
            return MODELS[model]()
        except KeyError:
            raise ValueError(f"unknown model {model!r}; expected one of {sorted(MODELS)}") from None
    return model


def fd_gradient_check(
    model: ScalarModel,
    theta: NDArray[np.float64],
    x: NDArray[np.float64],
    step: float = 1e-6,
    abs_below: float = 1e-8,
) -> float:
    """Worst-coordinate discrepancy between ``model.grad`` and central differences.

    Coordinate ``i`` is perturbed by ``step * (1 + |theta_i|)``. Errors are
    scaled by the max-norm of the analytic gradient; when that norm is below
    ``abs_below`` the absolute error is returned instead.
    """
    theta = np.asarray(theta, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    analytic = np.asarray(model.grad(theta, x), dtype=np.float64)
    numeric = np.empty_like(analytic)
    for i in range(theta.shape[0]):
        hi = step * (1.0 + abs(theta[i]))
        tp = theta.copy()
        tm = theta.copy()
        tp[i] += hi
        tm[i] -= hi
        # divide by the realized step, not the nominal one
        numeric[i] = (model.eval(tp, x) - model.eval(tm, x)) / (tp[i] - tm[i])
    err = float(np.max(np.abs(analytic - numeric)))
    scale = float(np.max(np.abs(analytic)))
    if scale < abs_below:
        return err
    return err / scale
