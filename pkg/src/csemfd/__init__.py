"""Finite-difference time-domain CSEM modelling in the fictitious wave domain."""

from .fdcoeff import uniform_staggered_weights, vandermonde_rows, interpolation_weights
from .gridgen import (
    StretchSpec,
    UniformSegment,
    StretchedSegment,
    solve_stretch_factor,
    build_axis,
    uniform_axis,
    assemble_grid,
)
from .medium import ResistivityModel, to_fictitious, model_ingest, model_emit, layered_model
from .kernel import Simulation, SourceSpec, Receiver, InstabilityError
from .oracle import wholespace_E, amplitude_phase_errors

__version__ = "0.1.0"
