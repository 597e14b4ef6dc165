"""stakit: inverse engineering and verification of fast driving protocols.

Design shortcuts that reproduce adiabatic end states in finite time
(harmonic expansions, trap transport, two-level inversions, critical-point
crossings, wavepacket splitting) and verify each one by direct numerical
propagation. Natural units hbar = m = 1 throughout.
"""

from . import cd, expansion, fastforward, interpolant, transport, twolevel, wavesim
from .errors import StakitError
from .interpolant import BoundarySpec, PolyFunction, build_poly, smoothstep_poly
from .timegrid import SampledFunction, TimeGrid
from .wavesim import SpatialGrid, WaveState

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec", "PolyFunction", "SampledFunction", "SpatialGrid",
    "StakitError", "TimeGrid", "WaveState", "build_poly", "cd", "expansion",
    "fastforward", "interpolant", "smoothstep_poly", "transport", "twolevel",
    "wavesim",
]
