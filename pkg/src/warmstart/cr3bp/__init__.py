"""CR3BP dynamics, propagation, periodic orbits and manifold targeting."""

from .constants import EARTH_MOON, SystemConstants, earth_moon_constants
from .dynamics import (
    PropagationError,
    effective_potential,
    eom,
    jacobi_constant,
    propagate,
    propagate_segment,
    propagate_segment_fixed,
    propagate_segment_trace,
    warm_up,
)
from .orbits import (
    CorrectionError,
    PeriodicOrbit,
    find_y_crossing,
    l1_position,
    lyapunov_orbit,
    orbit_state_at_phase,
    stable_manifold_arc,
)
from .variational import propagate_with_stm

__all__ = [
    "EARTH_MOON", "SystemConstants", "earth_moon_constants", "PropagationError",
    "effective_potential", "eom", "jacobi_constant", "propagate",
    "propagate_segment", "propagate_segment_fixed", "propagate_segment_trace",
    "warm_up", "CorrectionError", "PeriodicOrbit", "find_y_crossing",
    "l1_position", "lyapunov_orbit", "orbit_state_at_phase",
    "stable_manifold_arc", "propagate_with_stm",
]
