"""Incremental proximal methods realized as Bayesian filter updates."""

from .belief import (
    GaussianBelief,
    NotPositiveDefiniteError,
    Observation,
    covariance_downdate,
    gain_vector,
    spd_check,
)
from .estimators import (
    EKFRegressor,
    IncrementalProximalRegressor,
    KalmanRegressor,
    SGDBaselineRegressor,
)
from .models import (
    LinearModel,
    ScalarModel,
    SigmoidModel,
    fd_gradient_check,
    linear_eval,
    linear_grad,
    sigmoid_eval,
    sigmoid_grad,
)
from .optimizers import (
    InnerSolverConfig,
    OptimizerConfig,
    RunError,
    RunTrace,
    TraceRecord,
    approx_ipm_step,
    ekf_step,
    ipm_fixed_step,
    kalman_step,
    predict_step,
    run,
    sample_index,
    sgd_step,
)
from .prox import ProxConfig, batch_posterior, bayes_update_linear, prox_ls

__version__ = "0.1.0"
