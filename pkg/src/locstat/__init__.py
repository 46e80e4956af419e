"""Simulation and kernel-localized M-estimation for locally stationary time series."""

__version__ = "0.1.0"

from .contrasts import ContrastSpec, default_contrast
from .estimator import (EstimateCurve, EstimatorConfig, LocalMEstimator, OptimizerConfig, ThetaBox, estimate_at,
                        estimate_curve, localized_objective, make_config, weighted_yule_walker)
from .exceptions import (ConfigError, DataError, DegenerateWindowError, InadmissibleError, InvalidArgumentError,
                         LocstatError, SimulationExplosion)
from .experiments import McScenario, RmiseReport, clt_check, paper_scenario, run_mc, table_report
from .innovations import InnovationSpec, gaussian, uniform_sym
from .kernels import KernelSpec, bandwidth, epanechnikov, kernel_integral, kernel_l2_squared, uniform
from .models import Family, ModelSpec, Trajectory, builtin_scenario, parse_family, simulate, stationary_version
from .paths import ParameterPath, constant_path
from .theory import check_admissible, estimate_tau, lambda_bound, lipschitz_profile

__all__ = [
    "ContrastSpec", "default_contrast",
    "EstimateCurve", "EstimatorConfig", "LocalMEstimator", "OptimizerConfig", "ThetaBox", "estimate_at",
    "estimate_curve", "localized_objective", "make_config", "weighted_yule_walker",
    "ConfigError", "DataError", "DegenerateWindowError", "InadmissibleError", "InvalidArgumentError",
    "LocstatError", "SimulationExplosion",
    "McScenario", "RmiseReport", "clt_check", "paper_scenario", "run_mc", "table_report",
    "InnovationSpec", "gaussian", "uniform_sym",
    "KernelSpec", "bandwidth", "epanechnikov", "kernel_integral", "kernel_l2_squared", "uniform",
    "Family", "ModelSpec", "Trajectory", "builtin_scenario", "parse_family", "simulate", "stationary_version",
    "ParameterPath", "constant_path",
    "check_admissible", "estimate_tau", "lambda_bound", "lipschitz_profile",
]
