"""Mean barrier-crossing time of a transmitted wavepacket.

An observer at ``x_f > a`` sees, at each arrival time ``T``, the single
trajectory that crossed the barrier with inside momentum ``p2(T)``; it spent
``tau(T) = 2a / p2(T)`` inside.  Averaging over ``T`` with the arrival
density ``|psi(x_f, T)|^2`` gives the mean tunneling time.  The same
estimator with free dynamics gives the free reference time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from semitunnel.core import CoherentState, PhysicalSetup
from semitunnel.exact import ScatteringExpansion, free_packet
from semitunnel.semiclassical import trajectory_density
from semitunnel.trajectories import after_direct, solve_p1_after


class NegligibleTransmission(ValueError):
    """The arrival density never reaches the cutoff."""


@dataclass(frozen=True)
class QuadratureParams:
    n_steps: int = 2000
    threshold: float = 1e-4
    window: float = 50.0
    scan_step: float = 0.5
    scan_limit: float = 1e5
    weight: str = "semiclassical"  # or "exact"


@dataclass(frozen=True)
class TimeAverage:
    tau: float
    t_max: float
    n_steps: int
    norm: float


@dataclass(frozen=True)
class TunnelingTimeResult:
    p: float
    tau_barrier: float
    tau_free: float
    tau_class: float | None
    x_f: float
    t_max: float
    n_steps: int


def tau_of_T(T, q, x_f, setup: PhysicalSetup):
    """Time spent inside the barrier by the trajectory reaching ``x_f`` at ``T``."""
    if np.any(np.asarray(x_f) <= setup.a):
        raise ValueError("the observer must sit right of the barrier")
    p1 = np.asarray(solve_p1_after(q, x_f, T, setup))
    out = 2.0 * setup.a / np.sqrt(p1 * p1 - setup.p_tilde**2)
    return out[()] if out.ndim == 0 else out


def tau_classical(p: float, setup: PhysicalSetup) -> float | None:
    if p <= setup.p_tilde:
        return None
    return 2.0 * setup.a / math.sqrt(p * p - setup.p_tilde**2)


def _scan_cutoff(density, params: QuadratureParams) -> float:
    """Time after which the density stays below the threshold for a full window."""
    chunk = max(1, int(round(params.window / params.scan_step)))
    last_above = None
    t = 0.0
    while t < params.scan_limit:
        T = t + params.scan_step * np.arange(1, chunk + 1)
        above = np.flatnonzero(density(T) >= params.threshold)
        if above.size:
            last_above = T[above[-1]]
        t = T[-1]
        if last_above is not None and t - last_above >= params.window:
            return last_above + params.window
    if last_above is None:
        raise NegligibleTransmission(f"density at the observer never exceeds {params.threshold:g}")
    raise NegligibleTransmission("arrival density did not decay within the scan limit")


def _average(tau, density, params: QuadratureParams) -> TimeAverage:
    t_max = _scan_cutoff(density, params)
    dT = t_max / params.n_steps
    T = dT * np.arange(1, params.n_steps + 1)
    w = density(T) * dT
    norm = float(np.sum(w))
    return TimeAverage(float(np.sum(tau(T) * w) / norm), t_max, params.n_steps, norm)


def _state(q, p, setup):
    return CoherentState(float(q), float(p), setup)


def mean_tunneling_time(q, p, x_f, setup: PhysicalSetup, params: QuadratureParams | None = None) -> TimeAverage:
    params = params or QuadratureParams()
    if x_f <= setup.a:
        raise ValueError("the observer must sit right of the barrier")
    if p <= 0:
        raise ValueError("p must be positive")
    state = _state(q, p, setup)
    if params.weight == "semiclassical":

        def density(T):
            return trajectory_density(after_direct(q, x_f, T, setup), state)

    elif params.weight == "exact":
        expansion = ScatteringExpansion(state)

        def density(T):
            return np.abs(expansion.psi_series(x_f, T)) ** 2

    else:
        raise ValueError(f"unknown weight {params.weight!r}")
    return _average(lambda T: tau_of_T(T, q, x_f, setup), density, params)


def tau_free_mean(q, p, x_f, setup: PhysicalSetup, params: QuadratureParams | None = None) -> TimeAverage:
    params = params or QuadratureParams()
    if x_f <= setup.a:
        raise ValueError("the observer must sit right of the barrier")
    state = _state(q, p, setup)

    def density(T):
        return np.abs(free_packet(x_f, T, state)) ** 2

    return _average(lambda T: 2.0 * setup.a * T / (x_f - q), density, params)


def tunneling_times(p, setup: PhysicalSetup, q: float = -60.0, x_f: float | None = None, params: QuadratureParams | None = None) -> TunnelingTimeResult:
    """All three times for one momentum; the default observer sits at ``a + 10``."""
    x_f = setup.a + 10.0 if x_f is None else x_f
    barrier = mean_tunneling_time(q, p, x_f, setup, params)
    free = tau_free_mean(q, p, x_f, setup, params)
    return TunnelingTimeResult(float(p), barrier.tau, free.tau, tau_classical(p, setup), float(x_f), barrier.t_max, barrier.n_steps)
