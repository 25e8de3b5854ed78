"""Coverage analysis of cellular networks with tethered UAV base stations."""
from .channel import LinkKind
from .coverage import CoverageResult, coverage_probability, optimal_delta
from .model import (FIGURE_WINDOW_RADIUS, EnvironmentProfile, NetworkParams, ParameterError,
                    Settings, load_config, preset)
from .montecarlo import simulate_coverage
from .numerics import NumericalError
from .placement import DeploymentPlan, build_deployment_plan

__all__ = ["LinkKind", "CoverageResult", "coverage_probability", "optimal_delta",
           "FIGURE_WINDOW_RADIUS", "EnvironmentProfile", "NetworkParams", "ParameterError",
           "Settings", "load_config", "preset", "simulate_coverage", "NumericalError",
           "DeploymentPlan", "build_deployment_plan"]
