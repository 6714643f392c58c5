"""Turbo-coded single-user massive MIMO with conjugate-transpose precoding."""

from .analysis import (
    PlannerResult,
    combined_ub,
    f_stationary_point,
    objective_f,
    plan_antenna_range,
    sinr_av_b,
    sinr_av_b_combined,
    sinr_av_b_ub,
    spectral_efficiency,
    to_db,
)
from .montecarlo import BerRecord, SimulationPlan, ber_confidence, run_frame, run_sweep, validate_moments
from .phy import SystemConfig
from .turbo import InterleaverPerm, TurboSpec

__version__ = "0.1.0"
