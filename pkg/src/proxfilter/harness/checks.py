"""Self-checks of the algebraic identities the library relies on.

Used by the ``check`` subcommand; each check returns ``(name, passed, detail)``.
"""

from __future__ import annotations

import numpy as np

from ..belief import GaussianBelief, Observation
from ..models import LinearModel, SigmoidModel, fd_gradient_check
from ..optimizers import OptimizerConfig, covariance_laws_hold, ekf_step, kalman_step, run
from ..prox import ProxConfig, batch_posterior, bayes_update_linear, prox_ls
from .data import ExperimentConfig, generate_sigmoid_data


def random_spd(rng: np.random.Generator, d: int) -> np.ndarray:
    A = rng.standard_normal((d, d))
    return A @ A.T / d + 0.1 * np.eye(d)


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def check_prox_bayes(rng, trials: int = 100) -> tuple[str, bool, str]:
    worst = 0.0
    for _ in range(trials):
        d = int(rng.integers(1, 11))
        V = random_spd(rng, d)
        lam = float(rng.uniform(0.05, 2.0))
        theta0 = rng.standard_normal(d)
        obs = Observation(rng.standard_normal(), rng.standard_normal(d))
        prox = prox_ls(theta0, ProxConfig(lam, V), obs)
        post = bayes_update_linear(GaussianBelief(theta0, V), obs, lam)
        if not np.array_equal(prox, post.mean):
            return "prox == bayes", False, "posterior mean differs from prox output"
        grad = -2 * (obs.y - obs.x @ prox) * obs.x + 2 * lam * np.linalg.solve(V, prox - theta0)
        worst = max(worst, float(np.max(np.abs(grad))))
    return "prox == bayes", worst <= 1e-8, f"max optimality residual {worst:.3g}"


def check_batch(rng, datasets: int = 20, permutations: int = 5) -> tuple[str, bool, str]:
    worst = 0.0
    for _ in range(datasets):
        d, n, lam = 5, 50, float(rng.uniform(0.1, 1.0))
        prior = GaussianBelief(rng.standard_normal(d), random_spd(rng, d))
        data = [Observation(rng.standard_normal(), rng.standard_normal(d)) for _ in range(n)]
        ref = batch_posterior(prior, data, lam)
        for _ in range(permutations):
            belief = prior
            for i in rng.permutation(n):
                belief = kalman_step(belief, data[i], lam)
            worst = max(worst, _rel(belief.mean, ref.mean), _rel(belief.covariance, ref.covariance))
    return "sequential == batch", worst <= 1e-8, f"max relative deviation {worst:.3g}"


def check_ekf_reduction(rng, trials: int = 100) -> tuple[str, bool, str]:
    model = LinearModel()
    for _ in range(trials):
        d = int(rng.integers(1, 11))
        belief = GaussianBelief(rng.standard_normal(d), random_spd(rng, d))
        obs = Observation(rng.standard_normal(), rng.standard_normal(d))
        lam = float(rng.uniform(0.05, 2.0))
        if ekf_step(belief, model, obs, lam) != kalman_step(belief, obs, lam):
            return "ekf -> kalman", False, "linear EKF differs from Kalman update"
    return "ekf -> kalman", True, f"{trials} bitwise matches"


def check_gradients(rng, trials: int = 100) -> tuple[str, bool, str]:
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(1, 6))
        x = rng.standard_normal(m)
        worst = max(
            worst,
            fd_gradient_check(SigmoidModel(), rng.standard_normal(m + 1), x),
            fd_gradient_check(LinearModel(), rng.standard_normal(m), x),
        )
    return "gradient check", worst < 1e-6, f"worst error {worst:.3g}"


def check_covariance_laws(rng) -> tuple[str, bool, str]:
    cfg = ExperimentConfig(d=6, n=300, seed=int(rng.integers(2**31)))
    ds = generate_sigmoid_data(cfg, rng)
    trace = run(
        OptimizerConfig("ekf", lam=cfg.lam),
        SigmoidModel(),
        ds,
        GaussianBelief.prior(np.zeros(cfg.d)),
        cfg.n,
    )
    return "covariance laws", covariance_laws_hold(trace), f"{len(trace)} EKF steps"


def run_checks(seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    return [
        check_prox_bayes(rng),
        check_batch(rng),
        check_ekf_reduction(rng),
        check_gradients(rng),
        check_covariance_laws(rng),
    ]
