"""Energy-flexibility envelopes for lossy linear systems.

Trajectory-dependent (TD) envelopes bound the cumulative energy each lead time
can reach; trajectory-independent (TI) envelopes additionally guarantee that
every power trajectory staying inside them keeps the states within bounds.
"""

from .envelope import EnvelopeKind, EnvelopeSeries
from .model import (
    DiscreteSystem,
    LinearLossySystem,
    Scheme,
    StabilityError,
    StructureError,
    Trajectory,
    check_state_feasibility,
    discretize,
    matrix_exponential,
    simulate,
    validate_system,
)
from .rc import RcNetwork, archetype_catalog, compile_network, nine_room_builder, swiss_house
from .td import compute_td_envelope
from .ti_multi import DispatchPlan, compute_centralized_envelope, compute_distributed_box, compute_weight_tensors
from .ti_scalar import compute_ti_scalar_envelope

__version__ = "0.1.0"

__all__ = [
    "DiscreteSystem", "DispatchPlan", "EnvelopeKind", "EnvelopeSeries", "LinearLossySystem", "RcNetwork",
    "Scheme", "StabilityError", "StructureError", "Trajectory", "archetype_catalog", "check_state_feasibility",
    "compile_network", "compute_centralized_envelope", "compute_distributed_box", "compute_td_envelope",
    "compute_ti_scalar_envelope", "compute_weight_tensors", "discretize", "matrix_exponential",
    "nine_room_builder", "simulate", "swiss_house", "validate_system",
]
