"""Numerical verification of calibrations for the Mumford-Shah functional."""

import os as _os

if _os.environ.get("CALIBRA_THREADS"):
    # cap BLAS/OpenMP pools before numpy loads them
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["CALIBRA_THREADS"])

from .calib import (CalibrationReport, ConditionResult, SamplePlan, check_a1_ms, check_a2_ms, check_b1_ms,
                    check_b2_ms, check_box_flux, check_c1_divergence, check_c2_neumann,
                    check_general_calibration, check_interface_continuity, verify_ms)
from .core import (DiskDomain, GraphWindow, IntervalDomain, PiecewiseField, RectangleDomain, SbvFunction,
                   graph_window_contains)
from .energy import GeneralIntegrands, MsParams, QuadPlan, evaluate_general_energy, evaluate_ms_energy
from .errors import (CalibraError, ConfigurationError, DomainError, EvaluationError, NumericError,
                     ParameterError, PreconditionError, SizeError)
from .examples import build_example
from .flux import flux_integral, verify_flux_invariance, verify_lower_bound
from .oracle import Grid1d, enumerate_1d_bruteforce, generate_competitors, minimize_1d_dp
from .pde import check_condition_e1, solve_neumann

__all__ = [
    "CalibraError",
    "CalibrationReport",
    "ConditionResult",
    "ConfigurationError",
    "DiskDomain",
    "DomainError",
    "EvaluationError",
    "GeneralIntegrands",
    "GraphWindow",
    "Grid1d",
    "IntervalDomain",
    "MsParams",
    "NumericError",
    "ParameterError",
    "PiecewiseField",
    "PreconditionError",
    "QuadPlan",
    "RectangleDomain",
    "SamplePlan",
    "SbvFunction",
    "SizeError",
    "build_example",
    "check_a1_ms",
    "check_a2_ms",
    "check_b1_ms",
    "check_b2_ms",
    "check_box_flux",
    "check_c1_divergence",
    "check_c2_neumann",
    "check_condition_e1",
    "check_general_calibration",
    "check_interface_continuity",
    "enumerate_1d_bruteforce",
    "evaluate_general_energy",
    "evaluate_ms_energy",
    "flux_integral",
    "generate_competitors",
    "graph_window_contains",
    "minimize_1d_dp",
    "solve_neumann",
    "verify_flux_invariance",
    "verify_lower_bound",
    "verify_ms",
]

__version__ = "0.1.0"
