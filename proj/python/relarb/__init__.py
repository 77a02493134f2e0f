"""Entropy-weighted relative arbitrage versus the market."""

import json

from ._relarb import (
    ConfigError,
    DataError,
    Error,
    HypothesisError,
    IngestOptions,
    MarketPath,
    ModelSpec,
    NumericalError,
    SimplexError,
    convergence_study,
    entropy,
    entropy_portfolio,
    excess_growth_rate,
    export_path,
    ingest_caps_csv,
    market_weights,
    master_equation_residual,
    select_delta,
    simulate_path,
)
from . import _relarb


def run_ensemble(spec, **kwargs):
    """Pilot plus scored ensemble; returns the report as a dict."""
    return json.loads(_relarb.run_ensemble(spec, **kwargs))


def simulate_config(text):
    """Runs the ensemble described by a `key = value` config document."""
    return json.loads(_relarb.simulate_config(text))


def backtest(files, covariance_window=20, use_companions=True, epsilon=None):
    """Scores capitalization CSV files; each file is one path."""
    return json.loads(_relarb.backtest([str(f) for f in files], covariance_window, use_companions, epsilon))


__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "HypothesisError",
    "IngestOptions",
    "MarketPath",
    "ModelSpec",
    "NumericalError",
    "SimplexError",
    "backtest",
    "convergence_study",
    "entropy",
    "entropy_portfolio",
    "excess_growth_rate",
    "export_path",
    "ingest_caps_csv",
    "market_weights",
    "master_equation_residual",
    "run_ensemble",
    "select_delta",
    "simulate_config",
    "simulate_path",
]
