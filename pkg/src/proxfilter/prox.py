"""Proximal least-squares steps realized as conjugate Gaussian updates."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from numpy.typing import ArrayLike, NDArray

from .belief import (
    GaussianBelief,
    Observation,
    _check_lam,
    as_square,
    as_vector,
    covariance_downdate,
    gain_vector,
    require_spd,
    symmetrize,
)
from .models import linear_eval


@dataclass(frozen=True, eq=False)
class ProxConfig:
    """Weight ``lam`` and metric ``V`` of the penalty ``lam * ||theta - theta0||^2_{V^-1}``.

    ``lam`` doubles as the observation-noise variance in the Gaussian reading.
    """

    lam: float
    metric: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lam", _check_lam(self.lam))
        metric = as_square(self.metric, "metric")
        require_spd(metric, "metric")
        object.__setattr__(self, "metric", metric)


def prox_ls(theta0: ArrayLike, cfg: ProxConfig, obs: Observation) -> NDArray[np.float64]:
    """Exact minimizer of ``(y - x'theta)^2 + lam * ||theta - theta0||^2_{V^-1}``."""
    theta0 = as_vector(theta0, "theta0")
    if theta0.shape != obs.x.shape or cfg.metric.shape[0] != theta0.shape[0]:
        raise ValueError(
            f"dimension mismatch: theta0 {theta0.shape}, x {obs.x.shape}, metric {cfg.metric.shape}"
        )
    return theta0 + gain_vector(cfg.metric, obs.x, cfg.lam) * (obs.y - linear_eval(theta0, obs.x))


def bayes_update_linear(belief: GaussianBelief, obs: Observation, lam: float) -> GaussianBelief:
    """Posterior of ``N(mean, V)`` after observing ``y ~ N(x'theta, lam)``.

    The posterior mean is computed by :func:`prox_ls` with the prior covariance
    as metric, so the two agree bit for bit.
    """
    cfg = ProxConfig(lam, belief.covariance)
    mean = prox_ls(belief.mean, cfg, obs)
    return GaussianBelief(mean, covariance_downdate(belief.covariance, obs.x, cfg.lam))


def batch_posterior(
    prior: GaussianBelief, data: Iterable[Observation], lam: float
) -> GaussianBelief:
    """Closed-form posterior given all of ``data`` at once (one dense solve)."""
    lam = _check_lam(lam)
    data = list(data)
    if not data:
        return prior
    X = np.vstack([obs.x for obs in data])
    y = np.array([obs.y for obs in data])
    if X.shape[1] != prior.dim:
        raise ValueError(f"dimension mismatch: prior {prior.dim}, features {X.shape[1]}")

    prior_precision = la.solve(prior.covariance, np.eye(prior.dim), assume_a="pos")
    precision = symmetrize(prior_precision + X.T @ X / lam)
    rhs = np.column_stack([prior_precision @ prior.mean + X.T @ y / lam, np.eye(prior.dim)])
    try:
        sol = la.solve(precision, rhs, assume_a="pos")
    except la.LinAlgError:
        try:
            sol = la.solve(precision, rhs)
        except la.LinAlgError as err:
            raise np.linalg.LinAlgError("posterior precision is singular") from err
    return GaussianBelief(sol[:, 0], symmetrize(sol[:, 1:]))
