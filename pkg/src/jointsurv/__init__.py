"""Joint survival of correlated firms in a first-passage credit model.

First-order perturbation in the asset correlations, with a Gaussian-copula
comparison and a Monte Carlo oracle.
"""
__version__ = "0.1.0"

from .firm_model import (  # noqa: E402
    CalibrationError,
    CorrelationError,
    CorrelationSpec,
    FirmParams,
    MarketInputs,
    calibrate,
    read_correlation_csv,
    read_firm_csv,
    validate_correlation,
)
from .numerics import ConvergenceError, QuadratureConfig, RngStream  # noqa: E402
from .survival import (  # noqa: E402
    default_prob,
    partial_survival_U,
    partial_survival_U_gradient,
    survival_density,
    survival_prob,
    transition_density,
)
from .perturbation import (  # noqa: E402
    JointSurvivalResult,
    correlation_duration,
    default_correlation,
    first_order_correction,
    joint_survival,
    pairwise_decomposition,
)
from .copula import compare_models, copula_first_order, copula_joint_equicorrelated, thresholds_from_survival  # noqa: E402
from .mc_oracle import SimConfig, SimResult, ladder_study, simulate_joint_survival  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
