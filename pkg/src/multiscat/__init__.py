"""Periodized boundary-integral solver for acoustic scattering from
doubly-periodic multilayered media.

The public entry points are :func:`solve` for a single incidence angle,
:func:`spectra_sweep` and :func:`convergence_study` for parameter sweeps,
and :data:`PRESETS` / :func:`get_preset` for the canned configurations.
"""
from .config import StackConfig
from .surfaces import HeightFunction
from .assembly import BlockCache, SolveContext, build_context
from .quadrature import CorrectionCache, build_correction
from .solver import Solution, solve, solve_system
from .postprocess import (ConvergenceRow, SweepResult, convergence_study,
                          eval_field, flux_error, mode_powers, spectra_sweep)
from .presets import PRESETS, get_preset

__version__ = "0.1.0"

__all__ = [
    "StackConfig", "HeightFunction", "BlockCache", "SolveContext",
    "build_context", "CorrectionCache", "build_correction", "Solution",
    "solve", "solve_system", "ConvergenceRow", "SweepResult",
    "convergence_study", "eval_field", "flux_error", "mode_powers",
    "spectra_sweep", "PRESETS", "get_preset", "__version__",
]
