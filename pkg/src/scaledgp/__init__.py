"""Scaled gradient projection with summable variable-metric bounds."""

from .core import (
    ContractViolation,
    FeasibleRegion,
    InvalidInput,
    LineSearchFailure,
    LineSearchParams,
    QuadraticObjective,
    RunRecord,
    SmoothObjective,
    StoppingRule,
    armijo_linesearch,
    descent_direction,
    gp_solve,
    scaled_projection,
    sgp_solve,
    stationarity_residual,
)
from .metric import (
    BoundSchedule,
    DiagonalMetric,
    IdentityMetric,
    ScaledMetric,
    ThetaMonitor,
    clamp_to_metric,
    mu_at,
    theta_update,
)
from .steplength import BBSteplength, ConstantSteplength, SteplengthConfig, bb_steplengths, next_alpha

__version__ = "0.1.0"
