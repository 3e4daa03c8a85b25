"""Incremental proximal methods, their filter counterparts, and the run loop.

Point methods (``ipm-fixed``, ``approx-ipm``, ``sgd``) carry a parameter
vector. Filter methods (``kalman``, ``ekf``) carry a :class:`GaussianBelief`
whose covariance plays the role of a proximal metric that is refined after
every observation.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .belief import (
    SPD_TOL,
    GaussianBelief,
    Observation,
    _check_lam,
    as_square,
    as_vector,
    covariance_stats,
    filter_update,
    require_psd,
    require_spd,
    symmetrize,
)
from .models import LinearModel, ScalarModel
from .prox import ProxConfig, bayes_update_linear, prox_ls

ALGORITHMS = ("ipm-fixed", "kalman", "ekf", "approx-ipm", "sgd")
FILTER_ALGORITHMS = frozenset({"kalman", "ekf"})
SCHEDULES = ("random", "sequential")


@dataclass(frozen=True)
class InnerSolverConfig:
    """Backtracking gradient descent used to solve each nonlinear proximal subproblem."""

    max_iters: int = 100
    grad_tol: float = 1e-8
    initial_stepsize: float = 1.0
    backtrack: float = 0.5
    sufficient_decrease: float = 1e-4

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.grad_tol > 0 or not self.initial_stepsize > 0:
            raise ValueError("grad_tol and initial_stepsize must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie strictly inside (0, 1)")
        if not 0 < self.sufficient_decrease < 1:
            raise ValueError("sufficient_decrease must lie strictly inside (0, 1)")


@dataclass(frozen=True, eq=False)
class OptimizerConfig:
    """Settings for one algorithm; fields the algorithm does not use are ignored.

    ``fixed_metric`` defaults to the identity (sized at run time) for
    ``ipm-fixed`` and ``approx-ipm``. ``drift`` enables a random-walk
    prediction step before every filter update.
    """

    algorithm: str
    lam: float = 0.2
    fixed_metric: NDArray[np.float64] | None = None
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    sgd_stepsize: float = 0.1
    sgd_decay: bool = False
    drift: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        object.__setattr__(self, "lam", _check_lam(self.lam))
        if self.fixed_metric is not None:
            metric = as_square(self.fixed_metric, "fixed_metric")
            require_spd(metric, "fixed_metric")
            object.__setattr__(self, "fixed_metric", metric)
        if self.drift is not None:
            drift = as_square(self.drift, "drift")
            require_psd(drift, "drift")
            object.__setattr__(self, "drift", drift)
        if not self.sgd_stepsize > 0:
            raise ValueError("sgd_stepsize must be positive")

    @property
    def is_filter(self) -> bool:
        return self.algorithm in FILTER_ALGORITHMS

    def metric_for(self, d: int) -> NDArray[np.float64]:
        if self.fixed_metric is None:
            return np.eye(d)
        if self.fixed_metric.shape[0] != d:
            raise ValueError(f"fixed_metric is {self.fixed_metric.shape}, parameter dimension is {d}")
        return self.fixed_metric


# -- single steps -------------------------------------------------------------


def ipm_fixed_step(
    theta_prev: ArrayLike, cfg: OptimizerConfig, obs: Observation
) -> NDArray[np.float64]:
    """Classical IPM step on a linear least-squares term with a constant metric."""
    theta_prev = as_vector(theta_prev, "theta_prev")
    return prox_ls(theta_prev, ProxConfig(cfg.lam, cfg.metric_for(theta_prev.shape[0])), obs)


def kalman_step(belief: GaussianBelief, obs: Observation, lam: float) -> GaussianBelief:
    """Kalman measurement update; the metric at step k is the previous covariance."""
    return bayes_update_linear(belief, obs, lam)


def ekf_step(
    belief: GaussianBelief, model: ScalarModel, obs: Observation, lam: float
) -> GaussianBelief:
    """Extended Kalman update linearized at the current mean.

    The residual is taken on the nonlinear model itself, ``y - g(mean)``,
    while the gain and the covariance downdate use ``h = grad g(mean)``.
    """
    h = np.asarray(model.grad(belief.mean, obs.x), dtype=np.float64)
    pred = model.eval(belief.mean, obs.x)
    if not np.isfinite(pred) or not np.all(np.isfinite(h)):
        raise ValueError("model output or gradient is not finite")
    return filter_update(belief, h, obs.y - pred, lam)


def predict_step(belief: GaussianBelief, Q: ArrayLike) -> GaussianBelief:
    """Random-walk prediction: mean kept, covariance inflated by ``Q``."""
    Q = as_square(Q, "Q")
    if Q.shape != belief.covariance.shape:
        raise ValueError(f"Q is {Q.shape}, covariance is {belief.covariance.shape}")
    require_psd(Q, "Q")
    return GaussianBelief(belief.mean, symmetrize(belief.covariance + Q))


def sgd_step(
    theta: ArrayLike, model: ScalarModel, obs: Observation, stepsize: float
) -> NDArray[np.float64]:
    """Gradient step on ``(y - g(theta))^2``."""
    if not stepsize > 0:
        raise ValueError("stepsize must be positive")
    theta = as_vector(theta, "theta")
    grad = np.asarray(model.grad(theta, obs.x), dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise ValueError("model gradient is not finite")
    return theta + 2.0 * stepsize * (obs.y - model.eval(theta, obs.x)) * grad


class InnerResult(NamedTuple):
    theta: NDArray[np.float64]
    inner_iters: int
    objective_start: float
    objective_end: float
    aborted: bool = False


def prox_objective(
    theta: NDArray[np.float64],
    theta_prev: NDArray[np.float64],
    model: ScalarModel,
    obs: Observation,
    lam: float,
    metric_inv: NDArray[np.float64],
) -> float:
    """``(y - g(theta))^2 + lam * (theta - theta_prev)' V^-1 (theta - theta_prev)``."""
    delta = theta - theta_prev
    r = obs.y - model.eval(theta, obs.x)
    return r * r + lam * float(delta @ metric_inv @ delta)


def approx_ipm_step(
    theta_prev: ArrayLike, cfg: OptimizerConfig, model: ScalarModel, obs: Observation
) -> InnerResult:
    """Approximate nonlinear proximal step by backtracking gradient descent.

    Descent runs along the metric-scaled gradient ``-V grad`` (plain gradient
    descent when ``V = I``). Each line search starts from a Barzilai-Borwein
    trial step, or ``initial_stepsize`` when no curvature estimate exists yet,
    and halves it by ``backtrack`` until the Armijo condition holds, so the
    objective never increases. Stops once the subproblem gradient norm is at
    most ``grad_tol`` or after ``max_iters`` accepted steps. A non-finite
    objective aborts the step and returns ``theta_prev``.
    """
    theta_prev = as_vector(theta_prev, "theta_prev")
    inner = cfg.inner
    lam = cfg.lam
    metric = cfg.metric_for(theta_prev.shape[0])
    metric_inv = np.linalg.inv(metric)

    def objective_and_grad(theta):
        delta = theta - theta_prev
        wdelta = metric_inv @ delta
        r = obs.y - model.eval(theta, obs.x)
        value = r * r + lam * float(delta @ wdelta)
        grad = -2.0 * r * np.asarray(model.grad(theta, obs.x)) + 2.0 * lam * wdelta
        return value, grad

    theta = theta_prev
    value, grad = objective_and_grad(theta)
    start = value
    if not np.isfinite(value):
        return InnerResult(theta_prev, 0, start, value, aborted=True)
    iters = 0
    trial = inner.initial_stepsize
    while iters < inner.max_iters:
        if not np.all(np.isfinite(grad)):
            return InnerResult(theta_prev, iters, start, start, aborted=True)
        if math.sqrt(float(grad @ grad)) <= inner.grad_tol:
            break
        direction = metric @ grad
        slope = float(grad @ direction)
        t = trial
        while True:
            candidate = theta - t * direction
            cand_value = prox_objective(candidate, theta_prev, model, obs, lam, metric_inv)
            if not np.isfinite(cand_value):
                return InnerResult(theta_prev, iters, start, start, aborted=True)
            if cand_value <= value - inner.sufficient_decrease * t * slope:
                break
            t *= inner.backtrack
            if np.array_equal(candidate, theta):
                # step fell below floating-point resolution
                return InnerResult(theta, iters, start, value)
        new_value, new_grad = objective_and_grad(candidate)
        s = candidate - theta
        curvature = float(s @ (new_grad - grad))
        trial = float(s @ metric_inv @ s) / curvature if curvature > 0 else inner.initial_stepsize
        theta, value, grad = candidate, new_value, new_grad
        iters += 1
    return InnerResult(theta, iters, start, value)


def sample_index(rng: np.random.Generator, n: int) -> int:
    """Uniform draw from ``range(n)``, with replacement across calls."""
    if n < 1:
        raise ValueError("cannot sample an index from an empty dataset")
    return int(rng.integers(n))


# -- run loop -----------------------------------------------------------------


@dataclass
class TraceRecord:
    """State after iteration ``k``.

    Besides the exported columns, filter steps keep covariance diagnostics
    (asymmetry, smallest eigenvalue, smallest eigenvalue of ``V_{k-1} - V_k``)
    and approximate-IPM steps keep the subproblem objective at entry and exit.
    """

    k: int
    theta: NDArray[np.float64] | None = None
    step_norm: float | None = None
    param_error: float | None = None
    cov_diag_mean: float | None = None
    cov_offdiag_mean: float | None = None
    inner_iters: int | None = None
    index: int | None = None
    cov_asymmetry: float | None = None
    cov_min_eig: float | None = None
    cov_shrink_min_eig: float | None = None
    objective_start: float | None = None
    objective_end: float | None = None
    flagged: bool = False


@dataclass
class RunTrace:
    algorithm: str
    initial: TraceRecord
    records: list[TraceRecord] = field(default_factory=list)
    final: GaussianBelief | NDArray[np.float64] | None = None
    diverged_at: int | None = None

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> NDArray[np.float64]:
        return np.array(
            [np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records],
            dtype=np.float64,
        )

    @property
    def final_theta(self) -> NDArray[np.float64]:
        if isinstance(self.final, GaussianBelief):
            return self.final.mean
        return self.final


class RunError(RuntimeError):
    def __init__(self, k: int, algorithm: str, cause: Exception):
        super().__init__(f"{algorithm} step failed at iteration {k}: {cause}")
        self.k = k
        self.algorithm = algorithm


def _state_record(k, theta, V, theta_star):
    rec = TraceRecord(k=k, theta=theta.copy())
    if theta_star is not None:
        rec.param_error = float(np.linalg.norm(theta - theta_star))
    if V is not None:
        rec.cov_diag_mean, rec.cov_offdiag_mean = covariance_stats(V)
    return rec


def run(
    cfg: OptimizerConfig,
    model: ScalarModel | None,
    data: Sequence[Observation],
    init: GaussianBelief | ArrayLike,
    iterations: int,
    schedule: str = "sequential",
    rng: np.random.Generator | None = None,
    theta_star: ArrayLike | None = None,
) -> RunTrace:
    """Drive ``iterations`` steps of ``cfg.algorithm`` over ``data``.

    ``schedule='sequential'`` sweeps the data in order (wrapping around);
    ``'random'`` draws indices uniformly with replacement from ``rng``. A
    non-finite iterate stops the run and sets ``diverged_at`` instead of
    raising.
    """
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}; expected one of {SCHEDULES}")
    if schedule == "random" and rng is None:
        raise ValueError("the random schedule needs a seeded generator")
    if iterations > 0 and len(data) == 0:
        raise ValueError("cannot iterate over an empty dataset")
    if model is None:
        model = LinearModel()
    if cfg.algorithm in ("ipm-fixed", "kalman") and not isinstance(model, LinearModel):
        raise ValueError(f"{cfg.algorithm} is defined for the linear model only")

    if cfg.is_filter:
        if not isinstance(init, GaussianBelief):
            raise TypeError(f"{cfg.algorithm} needs a GaussianBelief initialization")
        require_spd(init.covariance, "initial covariance")
        state: GaussianBelief | NDArray[np.float64] = init
        theta = init.mean
        V = init.covariance
        if cfg.drift is not None and cfg.drift.shape != V.shape:
            raise ValueError(f"drift is {cfg.drift.shape}, covariance is {V.shape}")
    else:
        if isinstance(init, GaussianBelief):
            raise TypeError(f"{cfg.algorithm} needs a parameter vector initialization")
        state = theta = as_vector(init, "init")
        V = None
        if cfg.algorithm in ("ipm-fixed", "approx-ipm"):
            cfg.metric_for(theta.shape[0])

    if theta_star is not None:
        theta_star = as_vector(theta_star, "theta_star")
    trace = RunTrace(cfg.algorithm, _state_record(0, theta, V, theta_star))

    n = len(data)
    for k in range(1, iterations + 1):
        i = sample_index(rng, n) if schedule == "random" else (k - 1) % n
        obs = data[i]
        extra: dict = {}
        try:
            if cfg.algorithm == "ipm-fixed":
                new_state = ipm_fixed_step(theta, cfg, obs)
            elif cfg.algorithm == "sgd":
                step = cfg.sgd_stepsize / k if cfg.sgd_decay else cfg.sgd_stepsize
                with np.errstate(over="ignore", invalid="ignore"):
                    new_state = sgd_step(theta, model, obs, step)
            elif cfg.algorithm == "approx-ipm":
                res = approx_ipm_step(theta, cfg, model, obs)
                new_state = res.theta
                extra = {
                    "inner_iters": res.inner_iters,
                    "objective_start": res.objective_start,
                    "objective_end": res.objective_end,
                    "flagged": res.aborted,
                }
            else:
                prior = state if cfg.drift is None else predict_step(state, cfg.drift)
                if cfg.algorithm == "kalman":
                    new_state = kalman_step(prior, obs, cfg.lam)
                else:
                    new_state = ekf_step(prior, model, obs, cfg.lam)
        except Exception as err:
            raise RunError(k, cfg.algorithm, err) from err

        new_theta = new_state.mean if cfg.is_filter else new_state
        if not np.all(np.isfinite(new_theta)):
            trace.diverged_at = k
            break

        rec = _state_record(k, new_theta, new_state.covariance if cfg.is_filter else None, theta_star)
        rec.index = i
        rec.step_norm = float(np.linalg.norm(new_theta - theta))
        for key, value in extra.items():
            setattr(rec, key, value)
        if cfg.is_filter:
            V_new = new_state.covariance
            rec.cov_asymmetry = float(np.max(np.abs(V_new - V_new.T)))
            rec.cov_min_eig = float(np.linalg.eigvalsh(V_new)[0])
            if cfg.drift is None:
                rec.cov_shrink_min_eig = float(np.linalg.eigvalsh(symmetrize(V - V_new))[0])
            V = V_new
        trace.records.append(rec)
        state, theta = new_state, new_theta

    trace.final = state
    return trace


def covariance_laws_hold(trace: RunTrace, tol: float = SPD_TOL) -> bool:
    """Symmetry, PSD and (without drift) Loewner shrinkage at every recorded step."""
    for rec in trace.records:
        if rec.cov_asymmetry is None:
            continue
        if rec.cov_asymmetry > tol or rec.cov_min_eig < -tol:
            return False
        if rec.cov_shrink_min_eig is not None and rec.cov_shrink_min_eig < -tol:
            return False
    return True
