"""Interevent-time statistics of threshold exceedances in a CTRW valley model."""
from __future__ import annotations

__version__ = "0.1.0"

from .estimation import (
    FitError,
    FitReport,
    PiecewiseLinear,
    derive_elementary,
    fit_piecewise_tau,
    fit_psi,
    fit_psi_points,
    fit_rq_curve,
    fit_superscaling,
)
from .events import (
    Histogram,
    InputError,
    InterEventSample,
    ReturnSeries,
    extract_events,
    histogram,
    read_series_csv,
    rq_curve,
)
from .extreme_model import ThresholdPoint, WeibullParams, q_of_rq, rq_of_q
from .mc_sim import SimConfig, generate_series, sample_interevents
from .superstat import (
    Direction,
    RelaxationSpec,
    ScalingLaw,
    SuperstatParams,
    moment,
    psi,
    psi_cdf,
    psi_clustering,
)

__all__ = [
    "Direction",
    "FitError",
    "FitReport",
    "Histogram",
    "InputError",
    "InterEventSample",
    "PiecewiseLinear",
    "RelaxationSpec",
    "ReturnSeries",
    "ScalingLaw",
    "SimConfig",
    "SuperstatParams",
    "ThresholdPoint",
    "WeibullParams",
    "derive_elementary",
    "extract_events",
    "fit_piecewise_tau",
    "fit_psi",
    "fit_psi_points",
    "fit_rq_curve",
    "fit_superscaling",
    "generate_series",
    "histogram",
    "moment",
    "psi",
    "psi_cdf",
    "psi_clustering",
    "q_of_rq",
    "read_series_csv",
    "rq_curve",
    "rq_of_q",
    "sample_interevents",
]
