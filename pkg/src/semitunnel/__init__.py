"""Real-trajectory semiclassical propagation of a Gaussian wavepacket
through a one-dimensional square barrier, with exact quantum references
and semiclassical tunneling times."""

from semitunnel.core import (
    CoherentState,
    PhysicalSetup,
    TangentElements,
    coherent_amplitude,
    z_label,
)

__version__ = "0.1.0"

__all__ = [
    "CoherentState",
    "PhysicalSetup",
    "TangentElements",
    "coherent_amplitude",
    "z_label",
    "__version__",
]
