"""Tracer-kinetics toolkit: compartment-model simulation, graphical and
least-squares estimation, and an invertible network that predicts full
dynamic PET sequences from early frames."""

from .kinetics import (
    FengCoefficients,
    FrameModel,
    FrameSchedule,
    InputFunction,
    KineticParams,
    TimeActivityCurve,
    Tracer,
    beta_roots,
    compartment_ode_solve,
    ct_analytic,
    feng_input,
    frame_activity,
    standard_schedule,
)

__version__ = "0.1.0"
