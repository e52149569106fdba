"""Physical parameters and coherent-state helpers.

Units: the particle mass is fixed to 1.  The coherent state is the ground
state of an oscillator with position scale ``b`` and momentum scale ``c``,
so that ``hbar = b * c`` and ``lam = b / c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MASS = 1.0


@dataclass(frozen=True)
class PhysicalSetup:
    """Square barrier of height ``v0`` on ``[-a, a]`` plus wavepacket scales.

    ``hbar`` may be passed explicitly; it must then equal ``b * c``.
    """

    v0: float = 0.5
    a: float = 50.0
    b: float = 1.0
    c: float = 1.0
    hbar: float | None = None

    def __post_init__(self):
        for name in ("v0", "a", "b", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        product = self.b * self.c
        if self.hbar is None:
            object.__setattr__(self, "hbar", product)
        elif not math.isclose(self.hbar, product, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(f"inconsistent scales: hbar={self.hbar!r} but b*c={product!r}")

    @classmethod
    def from_hbar(cls, hbar: float, v0: float = 0.5, a: float = 50.0, lam: float = 1.0):
        """Build a setup from ``hbar`` and the ratio ``lam = b/c``."""
        if not (hbar > 0 and lam > 0):
            raise ValueError("hbar and lam must be positive")
        return cls(v0=v0, a=a, b=math.sqrt(hbar * lam), c=math.sqrt(hbar / lam))

    @property
    def lam(self) -> float:
        return self.b / self.c

    @property
    def mass(self) -> float:
        return MASS

    @property
    def p_tilde(self) -> float:
        """Critical momentum: kinetic energy equal to the barrier height."""
        return math.sqrt(2.0 * self.v0 * MASS)

    def with_v0(self, v0: float) -> "PhysicalSetup":
        return PhysicalSetup(v0=v0, a=self.a, b=self.b, c=self.c)


@dataclass(frozen=True)
class CoherentState:
    """Minimum-uncertainty Gaussian centred at ``(q, p)``."""

    q: float
    p: float
    setup: PhysicalSetup = field(default_factory=PhysicalSetup)

    @property
    def z(self) -> complex:
        return z_label(self)

    @classmethod
    def from_z(cls, z: complex, setup: PhysicalSetup) -> "CoherentState":
        return cls(q=math.sqrt(2.0) * setup.b * z.real, p=math.sqrt(2.0) * setup.c * z.imag, setup=setup)


@dataclass(frozen=True)
class TangentElements:
    """Upper row of the (dimensionless) tangent matrix.

    ``m_qq = dx_f/dx_i`` at fixed initial momentum and
    ``m_qp = (c/b) dx_f/dp_i`` at fixed initial position.  Fields may be
    scalars or numpy arrays of a common shape.
    """

    m_qq: float | np.ndarray
    m_qp: float | np.ndarray

    @property
    def complex(self):
        return self.m_qq + 1j * self.m_qp


def z_label(state: CoherentState) -> complex:
    s = state.setup
    return complex(state.q / s.b, state.p / s.c) / math.sqrt(2.0)


def coherent_amplitude(x, state: CoherentState):
    """Position representation <x|z> of the coherent state.

    The phase convention ``exp(i p (x - q/2) / hbar)`` matches the
    ``p q / 2`` term of the real-trajectory propagator at ``T -> 0``.
    """
    s = state.setup
    x = np.asarray(x, dtype=float)
    expo = -((x - state.q) ** 2) / (2.0 * s.b**2) + 1j * state.p * (x - state.q / 2.0) / s.hbar
    out = np.pi**-0.25 / math.sqrt(s.b) * np.exp(expo)
    return out[()] if out.ndim == 0 else out
