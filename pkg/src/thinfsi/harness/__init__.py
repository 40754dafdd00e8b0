"""Configuration, persistence, convergence studies and the command-line entry point."""
from .config import ConfigError, RunConfig, parse_config_text, read_config
from .study import RateReport, SlopeFit, convergence_study, fit_slope, residual_scaling

__all__ = ["ConfigError", "RunConfig", "parse_config_text", "read_config", "RateReport", "SlopeFit",
           "convergence_study", "fit_slope", "residual_scaling"]
