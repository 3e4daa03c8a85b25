"""scikit-learn compatible regressors wrapping the online optimizers.

``fit`` resets the state and streams the rows (one sequential pass by
default); ``partial_fit`` continues from the current state, which makes the
filter regressors usable as recursive estimators.
"""

from __future__ import annotations

from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .belief import GaussianBelief, Observation
from .models import LinearModel, ScalarModel, get_model
from .optimizers import InnerSolverConfig, OptimizerConfig, RunTrace, run


def _dim(init) -> int:
    return init.dim if isinstance(init, GaussianBelief) else init.shape[0]


class _OnlineRegressor(RegressorMixin, BaseEstimator):
    def _model(self) -> ScalarModel:
        return get_model(self.model)

    def _algorithm(self) -> str:
        raise NotImplementedError

    def _config(self, d: int) -> OptimizerConfig:
        raise NotImplementedError

    def _initial_state(self, d: int):
        theta0 = np.zeros(d) if self.theta0 is None else np.asarray(self.theta0, dtype=np.float64)
        if theta0.shape != (d,):
            raise ValueError(f"theta0 must have shape ({d},), got {theta0.shape}")
        return theta0

    def _stream(self, X: NDArray[Any], y: NDArray[Any], init) -> RunTrace:
        data = [Observation(yk, xk) for yk, xk in zip(y, X)]
        n_iter = len(data) if self.n_iter is None else self.n_iter
        rng = np.random.default_rng(self.random_state)
        return run(self._config(_dim(init)), self._model(), data, init, n_iter, self.schedule, rng)

    def _store(self, trace: RunTrace) -> None:
        if trace.diverged_at is not None:
            raise FloatingPointError(f"{self._algorithm()} diverged at iteration {trace.diverged_at}")
        self.trace_ = trace
        self.state_ = trace.final
        theta = trace.final_theta
        self.theta_ = theta
        if isinstance(self._model(), LinearModel):
            self.coef_, self.intercept_ = theta, 0.0
        else:
            self.coef_, self.intercept_ = theta[1:], float(theta[0])

    def fit(self, X: ArrayLike, y: ArrayLike) -> _OnlineRegressor:
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        init = self._initial_state(self._model().n_params(X.shape[1]))
        self._store(self._stream(X, y, init))
        return self

    def partial_fit(self, X: ArrayLike, y: ArrayLike) -> _OnlineRegressor:
        if not hasattr(self, "state_"):
            return self.fit(X, y)
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        self._store(self._stream(X, y, self.state_))
        return self

    def predict(self, X: ArrayLike) -> NDArray[np.float64]:
        check_is_fitted(self, "theta_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        model = self._model()
        return np.array([model.eval(self.theta_, x) for x in X])


class _FilterRegressor(_OnlineRegressor):
    def _initial_state(self, d: int) -> GaussianBelief:
        mean = super()._initial_state(d)
        cov = np.eye(d) if self.prior_cov is None else np.asarray(self.prior_cov, dtype=np.float64)
        return GaussianBelief.prior(mean, cov)

    def _config(self, d: int) -> OptimizerConfig:
        drift = None if self.drift is None else self.drift * np.eye(d)
        return OptimizerConfig(self._algorithm(), lam=self.lam, drift=drift)

    def _store(self, trace: RunTrace) -> None:
        super()._store(trace)
        self.covariance_ = trace.final.covariance

    def predict(self, X: ArrayLike, return_std: bool = False):
        """Predictive mean, and optionally the linearized predictive standard deviation.

        The standard deviation is ``sqrt(h' V h + lam)`` with ``h`` the model
        gradient at the current mean, so it includes observation noise.
        """
        mean = super().predict(X)
        if not return_std:
            return mean
        model = self._model()
        X = check_array(X)
        var = np.array(
            [h @ self.covariance_ @ h for h in (model.grad(self.theta_, x) for x in X)]
        )
        return mean, np.sqrt(var + self.lam)


class KalmanRegressor(_FilterRegressor):
    """Recursive Bayesian linear regression (Kalman filter on a static parameter).

    Parameters
    ----------
    lam : float, default=0.2
        Observation noise variance; also the proximal weight.
    theta0 : array-like of shape (n_features,), optional
        Prior mean, zeros by default.
    prior_cov : array-like of shape (n_features, n_features), optional
        Prior covariance, identity by default.
    drift : float, optional
        If set, a random-walk prediction with covariance ``drift * I`` precedes
        each update, which lets the estimate track a drifting parameter.
    n_iter : int, optional
        Number of updates per ``fit`` call; one pass over the rows by default.
    schedule : {"sequential", "random"}, default="sequential"
    random_state : int or Generator, optional
        Seeds the index sampler of the random schedule.

    Attributes
    ----------
    theta_, coef_ : ndarray
        Posterior mean.
    covariance_ : ndarray
        Posterior covariance.
    trace_ : RunTrace
        Per-update diagnostics of the last ``fit``/``partial_fit`` call.
    """

    model = "linear"

    def __init__(
        self,
        lam: float = 0.2,
        *,
        theta0: ArrayLike | None = None,
        prior_cov: ArrayLike | None = None,
        drift: float | None = None,
        n_iter: int | None = None,
        schedule: str = "sequential",
        random_state: int | np.random.Generator | None = None,
    ) -> None:
        self.lam = lam
        self.theta0 = theta0
        self.prior_cov = prior_cov
        self.drift = drift
        self.n_iter = n_iter
        self.schedule = schedule
        self.random_state = random_state

    def _algorithm(self) -> str:
        return "kalman"


class EKFRegressor(_FilterRegressor):
    """Nonlinear least squares by extended Kalman filtering.

    Same parameters as :class:`KalmanRegressor`, plus ``model`` (``"sigmoid"``,
    ``"linear"`` or any :class:`~proxfilter.models.ScalarModel`). For the
    sigmoid model the first parameter is the intercept.
    """

    def __init__(
        self,
        model: str | ScalarModel = "sigmoid",
        lam: float = 0.2,
        *,
        theta0: ArrayLike | None = None,
        prior_cov: ArrayLike | None = None,
        drift: float | None = None,
        n_iter: int | None = None,
        schedule: str = "sequential",
        random_state: int | np.random.Generator | None = None,
    ) -> None:
        self.model = model
        self.lam = lam
        self.theta0 = theta0
        self.prior_cov = prior_cov
        self.drift = drift
        self.n_iter = n_iter
        self.schedule = schedule
        self.random_state = random_state

    def _algorithm(self) -> str:
        return "ekf"


class IncrementalProximalRegressor(_OnlineRegressor):
    """Incremental proximal method with a constant metric.

    The linear model uses the closed-form step; other models solve each
    proximal subproblem with the inner gradient-descent solver.
    """

    def __init__(
        self,
        model: str | ScalarModel = "sigmoid",
        lam: float = 0.2,
        *,
        metric: ArrayLike | None = None,
        theta0: ArrayLike | None = None,
        inner_max_iters: int = 100,
        inner_grad_tol: float = 1e-8,
        inner_stepsize: float = 1.0,
        inner_backtrack: float = 0.5,
        n_iter: int | None = None,
        schedule: str = "sequential",
        random_state: int | np.random.Generator | None = None,
    ) -> None:
        self.model = model
        self.lam = lam
        self.metric = metric
        self.theta0 = theta0
        self.inner_max_iters = inner_max_iters
        self.inner_grad_tol = inner_grad_tol
        self.inner_stepsize = inner_stepsize
        self.inner_backtrack = inner_backtrack
        self.n_iter = n_iter
        self.schedule = schedule
        self.random_state = random_state

    def _algorithm(self) -> str:
        return "ipm-fixed" if isinstance(self._model(), LinearModel) else "approx-ipm"

    def _config(self, d: int) -> OptimizerConfig:
        inner = InnerSolverConfig(
            max_iters=self.inner_max_iters,
            grad_tol=self.inner_grad_tol,
            initial_stepsize=self.inner_stepsize,
            backtrack=self.inner_backtrack,
        )
        metric = np.eye(d) if self.metric is None else self.metric
        return OptimizerConfig(self._algorithm(), lam=self.lam, fixed_metric=metric, inner=inner)


class SGDBaselineRegressor(_OnlineRegressor):
    """Plain stochastic gradient descent on the squared residual, for comparison."""

    def __init__(
        self,
        model: str | ScalarModel = "sigmoid",
        stepsize: float = 0.1,
        *,
        decay: bool = False,
        theta0: ArrayLike | None = None,
        n_iter: int | None = None,
        schedule: str = "sequential",
        random_state: int | np.random.Generator | None = None,
    ) -> None:
        self.model = model
        self.stepsize = stepsize
        self.decay = decay
        self.theta0 = theta0
        self.n_iter = n_iter
        self.schedule = schedule
        self.random_state = random_state

    def _algorithm(self) -> str:
        return "sgd"

    def _config(self, d: int) -> OptimizerConfig:
        return OptimizerConfig("sgd", sgd_stepsize=self.stepsize, sgd_decay=self.decay)
