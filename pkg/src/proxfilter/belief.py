"""Gaussian beliefs and the rank-one primitives shared by every filter update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

SPD_TOL = 1e-10


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix that must be SPD/PSD fails the factorization test."""


def as_vector(v: ArrayLike, name: str = "vector") -> NDArray[np.float64]:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_square(m: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def symmetrize(m: NDArray[np.float64]) -> NDArray[np.float64]:
    return 0.5 * (m + m.T)


def spd_check(m: ArrayLike, tol: float = SPD_TOL) -> bool:
    """True iff ``m`` is symmetric to ``tol`` (max-norm) with smallest eigenvalue >= -tol."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.all(np.isfinite(m)):
        return False
    if m.size == 0:
        return True
    if np.max(np.abs(m - m.T)) > tol:
        return False
    return bool(np.linalg.eigvalsh(symmetrize(m))[0] >= -tol)


def require_psd(m: NDArray[np.float64], name: str = "matrix", tol: float = SPD_TOL) -> None:
    """Factorization-based PSD test: Cholesky of ``m + tol*I`` must succeed."""
    if np.max(np.abs(m - m.T), initial=0.0) > tol:
        raise NotPositiveDefiniteError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(m + tol * np.eye(m.shape[0]))
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"{name} is not positive semidefinite") from None


def require_spd(m: NDArray[np.float64], name: str = "matrix", tol: float = SPD_TOL) -> None:
    """Strict version of :func:`require_psd` used for priors and metrics."""
    if np.max(np.abs(m - m.T), initial=0.0) > tol:
        raise NotPositiveDefiniteError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(symmetrize(m))
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from None


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be a positive finite number, got {lam}")
    return lam


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """Mean and covariance of a Gaussian over the parameter vector.

    Parameters
    ----------
    mean : ndarray of shape (d,)
        Current estimate.
    covariance : ndarray of shape (d, d)
        Symmetric positive (semi-)definite uncertainty of ``mean``.
    """

    mean: NDArray[np.float64]
    covariance: NDArray[np.float64]

    def __post_init__(self) -> None:
        mean = as_vector(self.mean, "mean")
        cov = as_square(self.covariance, "covariance")
        if cov.shape[0] != mean.shape[0]:
            raise ValueError(
                f"mean has dimension {mean.shape[0]} but covariance is {cov.shape}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def prior(cls, mean: ArrayLike, covariance: ArrayLike | None = None) -> GaussianBelief:
        """Build an initial belief; the covariance must be strictly positive definite."""
        mean = as_vector(mean, "mean")
        if covariance is None:
            covariance = np.eye(mean.shape[0])
        belief = cls(mean, covariance)
        require_spd(belief.covariance, "prior covariance")
        return belief

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GaussianBelief):
            return NotImplemented
        return bool(
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.covariance, other.covariance)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Observation:
    """One cost component: scalar target ``y`` and its feature/input vector ``x``."""

    y: float
    x: NDArray[np.float64]

    def __post_init__(self) -> None:
        y = float(self.y)
        if not np.isfinite(y):
            raise ValueError("observation target is not finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", as_vector(self.x, "x"))


def _check_pair(V: NDArray[np.float64], h: NDArray[np.float64]) -> None:
    if V.shape[0] != h.shape[0]:
        raise ValueError(f"dimension mismatch: covariance {V.shape} vs vector {h.shape}")


def gain_vector(V: ArrayLike, h: ArrayLike, lam: float) -> NDArray[np.float64]:
    """Kalman gain ``V h / (lam + h' V h)`` for a scalar observation with noise ``lam``."""
    V = as_square(V, "V")
    h = as_vector(h, "h")
    _check_pair(V, h)
    lam = _check_lam(lam)
    Vh = V @ h
    return Vh / (lam + h @ Vh)


def covariance_downdate(V: ArrayLike, h: ArrayLike, lam: float) -> NDArray[np.float64]:
    """Posterior covariance ``V - V h h' V / (lam + h' V h)``, symmetrized.

    Raises
    ------
    NotPositiveDefiniteError
        If ``V`` is not PSD to within ``SPD_TOL``.
    """
    V = as_square(V, "V")
    h = as_vector(h, "h")
    _check_pair(V, h)
    lam = _check_lam(lam)
    require_psd(V, "V")
    Vh = V @ h
    return symmetrize(V - np.outer(Vh, Vh) / (lam + h @ Vh))


def filter_update(
    belief: GaussianBelief, h: NDArray[np.float64], residual: float, lam: float
) -> GaussianBelief:
    """Shared measurement update: gain along ``h`` times ``residual``, rank-one downdate."""
    V = belief.covariance
    mean = belief.mean + gain_vector(V, h, lam) * residual
    return GaussianBelief(mean, covariance_downdate(V, h, lam))


def covariance_stats(V: NDArray[np.float64]) -> tuple[float, float]:
    """Mean absolute diagonal and mean absolute off-diagonal entry of ``V``."""
    d = V.shape[0]
    absV = np.abs(V)
    diag = float(np.mean(np.diag(absV)))
    if d == 1:
        return diag, 0.0
    off = float((absV.sum() - np.trace(absV)) / (d * d - d))
    return diag, off
