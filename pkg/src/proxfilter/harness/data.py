"""Seeded synthetic regression data."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from ..belief import Observation
from ..models import get_model


@dataclass
class ExperimentConfig:
    """Everything needed to regenerate a dataset and rerun an experiment.

    Defaults follow the sigmoid-fitting setup: ``d = 21`` and ``lam = 0.2``.
    ``n`` and the input distribution (standard normal) are our own choices.
    """

    model: str = "sigmoid"
    d: int = 21
    n: int = 2000
    lam: float = 0.2
    iterations: int | None = None
    seed: int = 0
    algorithms: tuple[str, ...] = ("ekf", "approx-ipm")
    schedule: str = "sequential"
    input_dist: str = "normal"
    out_dir: Path | None = None
    q: float | None = None
    inner_max_iters: int = 100
    inner_grad_tol: float = 1e-8
    inner_stepsize: float = 1.0
    inner_backtrack: float = 0.5
    sgd_stepsize: float = 0.1
    sgd_decay: bool = False
    data_path: Path | None = None

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.input_dist != "normal":
            raise ValueError(f"unsupported input distribution {self.input_dist!r}")
        get_model(self.model)


@dataclass(eq=False)
class DataSet:
    """Rows ``(y_k, x_k)`` plus the parameter that generated them."""

    X: NDArray[np.float64]
    y: NDArray[np.float64]
    theta_star: NDArray[np.float64] | None
    model: str
    lam: float
    seed: int | None = None

    def __post_init__(self) -> None:
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y have different numbers of rows")
        if self.theta_star is not None:
            self.theta_star = np.asarray(self.theta_star, dtype=np.float64)
            if self.theta_star.shape[0] != self.d:
                raise ValueError("theta_star does not match the parameter dimension")
        self._obs = [Observation(yk, xk) for yk, xk in zip(self.y, self.X)]

    @property
    def d(self) -> int:
        return get_model(self.model).n_params(self.X.shape[1])

    def __len__(self) -> int:
        return len(self._obs)

    def __getitem__(self, i: int) -> Observation:
        return self._obs[i]

    def __iter__(self):
        return iter(self._obs)


def _generate(cfg: ExperimentConfig, rng: np.random.Generator, model_name: str) -> DataSet:
    model = get_model(model_name)
    n_inputs = cfg.d - 1 if model_name == "sigmoid" else cfg.d
    theta_star = rng.standard_normal(cfg.d)
    X = rng.standard_normal((cfg.n, n_inputs))
    noise = np.sqrt(cfg.lam) * rng.standard_normal(cfg.n)
    clean = np.array([model.eval(theta_star, x) for x in X])
    return DataSet(X, clean + noise, theta_star, model_name, cfg.lam, cfg.seed)


def generate_sigmoid_data(cfg: ExperimentConfig, rng: np.random.Generator) -> DataSet:
    """``y_k = sigmoid(theta* ; x_k) + eps_k`` with ``theta* ~ N(0, I_d)``, ``x_k ~ N(0, I_{d-1})``, ``eps_k ~ N(0, lam)``."""
    return _generate(cfg, rng, "sigmoid")


def generate_linear_data(cfg: ExperimentConfig, rng: np.random.Generator) -> DataSet:
    return _generate(cfg, rng, "linear")


def generate_data(cfg: ExperimentConfig, rng: np.random.Generator) -> DataSet:
    if cfg.model == "sigmoid":
        return generate_sigmoid_data(cfg, rng)
    return generate_linear_data(cfg, rng)
