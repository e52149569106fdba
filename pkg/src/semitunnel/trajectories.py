"""Real classical trajectories from ``q`` to ``x_f`` in time ``T``.

Every trajectory that meets the barrier is fixed by three path lengths:
``d1`` travelled before the barrier (momentum ``p1``), ``d2`` travelled
inside it (momentum ``p2 = sqrt(p1**2 - p_tilde**2)``) and ``d3`` after it
(momentum ``p1`` again).  The travel time is

    T = (d1 + d3) / p1 + d2 / p2,

which squares into the quartic ``(p1**2 - p_tilde**2) (p1 T - d1 - d3)**2
= d2**2 p1**2``.  Its roots are found with a companion matrix and the
physical one is then polished on the unsquared time equation, written in
``p2`` so that near-threshold roots (``p1 -> p_tilde``) stay resolved.

All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from semitunnel.core import PhysicalSetup, TangentElements

MIN_TIME = 1e-9


class Region(enum.Enum):
    BEFORE = "before"
    INSIDE = "inside"
    AFTER = "after"


class Kind(enum.Enum):
    DIRECT = "direct"
    REFLECTED = "reflected"
    GHOST = "ghost"


class NoTrajectoryError(ValueError):
    """No real trajectory connects the requested end points."""


class FocalPointError(ArithmeticError):
    """The Van Vleck prefactor diverges (``S_if`` vanishes)."""


@dataclass(frozen=True)
class Trajectory:
    region: Region
    kind: Kind
    p_i: float | np.ndarray
    action: float | np.ndarray
    tangent: TangentElements
    t_segments: tuple
    p_inside: float | np.ndarray | None = None

    @property
    def duration(self):
        return sum(seg[0] for seg in self.t_segments)


# ---------------------------------------------------------------------------
# quartic machinery


def momentum_quartic(d1, d2, d3, T, p_tilde):
    """Coefficients (highest power first) of the crossing quartic in ``p1``.

    Returned with shape ``broadcast_shape + (5,)``.
    """
    d1, d2, d3, T = np.broadcast_arrays(*map(np.asarray, (d1, d2, d3, T)))
    e = d1 + d3
    s = p_tilde**2
    return np.stack(
        [
            T**2,
            -2.0 * e * T,
            e**2 - s * T**2 - d2**2,
            2.0 * s * e * T,
            -s * e**2,
        ],
        axis=-1,
    ).astype(float)


def quartic_roots(coeffs):
    """All four roots of quartic(s) via companion-matrix eigenvalues.

    ``coeffs`` has shape ``(..., 5)`` with a non-zero leading coefficient.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    monic = coeffs[..., 1:] / coeffs[..., :1]
    comp = np.zeros(coeffs.shape[:-1] + (4, 4))
    comp[..., 0, :] = -monic
    comp[..., 1, 0] = comp[..., 2, 1] = comp[..., 3, 2] = 1.0
    return np.linalg.eigvals(comp)


def quartic_residual(p1, d1, d2, d3, T, p_tilde, p2=None):
    """Quartic residual at ``p1`` relative to ``d2**2 p1**2``.

    Evaluated in factored form.  Near threshold ``p1**2 - p_tilde**2``
    cancels catastrophically; pass the inside momentum ``p2`` to use
    ``p2**2`` for that factor instead.
    """
    p1 = np.asarray(p1, dtype=float)
    T = np.asarray(T, dtype=float)
    e = np.asarray(d1, dtype=float) + np.asarray(d3, dtype=float)
    kin = p1 * p1 - p_tilde**2 if p2 is None else np.asarray(p2, dtype=float) ** 2
    d2 = np.asarray(d2, dtype=float)
    scale = d2**2 * p1**2
    return np.abs(kin * (p1 * T - e) ** 2 - scale) / scale


def _companion_guess(d1, d2, d3, T, p_tilde):
    roots = quartic_roots(momentum_quartic(d1, d2, d3, T, p_tilde))
    re = roots.real
    e = (d1 + d3)[..., None]
    ok = (np.abs(roots.imag) <= 1e-7 * np.maximum(np.abs(re), 1.0)) & (re > p_tilde) & (re * T[..., None] >= e)
    # among admissible roots keep the largest; the physical root is unique
    guess = np.where(ok, re, -np.inf).max(axis=-1)
    return np.where(np.isfinite(guess), guess, np.nan)


def solve_crossing(d1, d2, d3, T, p_tilde, *, max_iter: int = 80):
    """Return ``(p1, p2)`` for the trajectory with the given path lengths.

    ``h(p2) = d2 + (d1 + d3) p2 / p1 - T p2`` is concave on ``p2 > 0`` with
    ``h(0) = d2 >= 0``, so Newton started right of the root converges
    monotonically.  With ``d2 == 0`` the particle stops exactly at the
    barrier edge: ``p1 = (d1+d3)/T`` when that exceeds ``p_tilde``,
    otherwise the threshold limit ``p2 = 0``.
    """
    d1, d2, d3, T = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (d1, d2, d3, T)])
    if np.any(T < MIN_TIME):
        raise ValueError(f"propagation time must be at least {MIN_TIME}")
    # d3 < 0 is the analytic continuation of the after-barrier formula
    if np.any(d1 < 0) or np.any(d2 < 0) or np.any(d1 + d3 < 0):
        raise NoTrajectoryError("path lengths must be non-negative")
    s = p_tilde**2
    e = d1 + d3
    hi = (d1 + d2 + d3) / T

    with np.errstate(invalid="ignore", divide="ignore"):
        guess_p1 = _companion_guess(d1, d2, d3, T, p_tilde)
        p2 = np.sqrt(np.maximum(guess_p1**2 - s, 0.0))

        def h(x):
            return d2 + e * x / np.sqrt(x * x + s) - T * x

        bad = ~np.isfinite(p2) | (h(p2) > 0) | (p2 <= 0)
        p2 = np.where(bad, hi, p2)
        for _ in range(max_iter):
            p1 = np.sqrt(p2 * p2 + s)
            hv = d2 + e * p2 / p1 - T * p2
            dh = e * s / p1**3 - T
            step = hv / dh
            step = np.where(np.isfinite(step), step, 0.0)
            p2_new = np.maximum(p2 - step, 0.0)
            done = np.abs(p2_new - p2) <= 4 * np.finfo(float).eps * np.maximum(p2_new, 1e-300)
            p2 = p2_new
            if np.all(done):
                break

    edge = d2 == 0
    if np.any(edge):
        slow = e / T
        p2 = np.where(edge, np.where(slow > p_tilde, np.sqrt(np.maximum(slow**2 - s, 0.0)), 0.0), p2)
    p1 = np.sqrt(p2 * p2 + s)
    return p1[()], p2[()]


# ---------------------------------------------------------------------------
# geometry helpers


def critical_time(q, setup: PhysicalSetup):
    """Earliest time a reflected trajectory exists: ``-(a+q)/p_tilde``."""
    return -(setup.a + q) / setup.p_tilde


def critical_distance(q, T, setup: PhysicalSetup):
    """``x_c = q + 2a + p_tilde T``; reflection needs ``-x_f <= x_c``."""
    return q + 2.0 * setup.a + setup.p_tilde * T


def _check_time(T):
    if np.any(np.asarray(T) < MIN_TIME):
        raise ValueError(f"propagation time must be at least {MIN_TIME}")


def _check_start(q, setup):
    if np.any(np.asarray(q) >= -setup.a):
        raise NoTrajectoryError("the packet must start left of the barrier (q < -a)")


def _scalar(*arrays):
    return all(np.ndim(a) == 0 for a in arrays)


def _out(value, scalar):
    return float(value) if scalar else value


# ---------------------------------------------------------------------------
# before the barrier


def direct_before(q, x_f, T, setup: PhysicalSetup) -> Trajectory:
    _check_time(T)
    scalar = _scalar(q, x_f, T)
    q, x_f, T = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (q, x_f, T)])
    p_i = (x_f - q) / T
    action = (x_f - q) ** 2 / (2.0 * T)
    tangent = TangentElements(_out(np.ones_like(T), scalar), _out(T / setup.lam, scalar))
    return Trajectory(
        Region.BEFORE,
        Kind.DIRECT,
        _out(p_i, scalar),
        _out(action, scalar),
        tangent,
        ((_out(T, scalar), _out(p_i, scalar)),),
    )


def reflected_exists(q, x_f, T, setup: PhysicalSetup):
    """Mask of (q, x_f, T) for which the wall-reflected trajectory exists."""
    T = np.asarray(T, dtype=float)
    return (T >= critical_time(q, setup)) & (-np.asarray(x_f) <= critical_distance(q, T, setup))


def reflected_before(q, x_f, T, setup: PhysicalSetup) -> Trajectory | None:
    """Trajectory bouncing off the barrier at ``-a`` before reaching ``x_f``.

    Scalar inputs give ``None`` when the trajectory does not exist; array
    inputs carry NaN in the absent entries.
    """
    _check_time(T)
    scalar = _scalar(q, x_f, T)
    exists = reflected_exists(q, x_f, T, setup)
    if scalar and not bool(exists):
        return None
    q, x_f, T = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (q, x_f, T)])
    a = setup.a
    nan = np.where(exists, 1.0, np.nan)
    p_i = -(x_f + q + 2.0 * a) / T * nan
    action = (x_f + q + 2.0 * a) ** 2 / (2.0 * T) * nan
    t1 = -(a + q) / np.where(p_i > 0, p_i, np.nan)
    t1 = np.where(p_i == 0, T, t1)
    tangent = TangentElements(_out(-np.ones_like(T) * nan, scalar), _out(-T / setup.lam * nan, scalar))
    return Trajectory(
        Region.BEFORE,
        Kind.REFLECTED,
        _out(p_i, scalar),
        _out(action, scalar),
        tangent,
        ((_out(t1, scalar), _out(p_i, scalar)), (_out(T - t1, scalar), _out(-p_i, scalar))),
    )


# ---------------------------------------------------------------------------
# inside the barrier


def _segment_action(setup, t1, p1, t2, p2, t3=0.0):
    return 0.5 * p1**2 * t1 + (0.5 * p2**2 - setup.v0) * t2 + 0.5 * p1**2 * t3


def solve_p1_inside(q, x_f, T, setup: PhysicalSetup):
    """Initial momentum of the direct trajectory ending inside the barrier."""
    _check_start(q, setup)
    p1, _ = solve_crossing(-(setup.a + np.asarray(q)), np.asarray(x_f) + setup.a, 0.0, T, setup.p_tilde)
    return p1


def action_inside(p1, q, x_f, setup: PhysicalSetup):
    """Closed-form action of the direct trajectory ending inside the barrier."""
    p1 = np.asarray(p1, dtype=float)
    if np.any(p1 <= setup.p_tilde):
        raise ValueError("p1 must exceed the critical momentum")
    a, v0 = setup.a, setup.v0
    p2 = np.sqrt(p1**2 - 2.0 * v0)
    out = -0.5 * (a + q) * p1 + 0.5 * (x_f + a) * p2 - v0 * (x_f + a) / p2
    return out[()] if np.ndim(out) == 0 else out


def inside_direct(q, x_f, T, setup: PhysicalSetup) -> Trajectory:
    _check_start(q, setup)
    scalar = _scalar(q, x_f, T)
    q, x_f, T = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (q, x_f, T)])
    a = setup.a
    p1, p2 = solve_crossing(-(a + q), x_f + a, 0.0, T, setup.p_tilde)
    t1 = -(a + q) / p1
    t2 = T - t1
    action = _segment_action(setup, t1, p1, t2, p2)
    # threshold edge (p2 == 0): the prefactor diverges and the amplitude vanishes
    with np.errstate(divide="ignore", invalid="ignore"):
        m_qp = ((p1 / p2) * t2 + (p2 / p1) * t1) / setup.lam
    tangent = TangentElements(_out(p2 / p1, scalar), _out(m_qp, scalar))
    return Trajectory(
        Region.INSIDE,
        Kind.DIRECT,
        _out(p1, scalar),
        _out(action, scalar),
        tangent,
        ((_out(t1, scalar), _out(p1, scalar)), (_out(t2, scalar), _out(p2, scalar))),
        p_inside=_out(p2, scalar),
    )


def ghost_p1_inside(q, x_f, T, setup: PhysicalSetup):
    """Initial momentum of the trajectory reflected at ``+a`` back to ``x_f``."""
    _check_start(q, setup)
    p1, _ = solve_crossing(-(setup.a + np.asarray(q)), 3.0 * setup.a - np.asarray(x_f), 0.0, T, setup.p_tilde)
    return p1


def ghost_action(p1, q, x_f, setup: PhysicalSetup):
    p1 = np.asarray(p1, dtype=float)
    if np.any(p1 <= setup.p_tilde):
        raise ValueError("p1 must exceed the critical momentum")
    a, v0 = setup.a, setup.v0
    out = -0.5 * (a + q) * p1 + (0.5 * p1**2 - 2.0 * v0) * (3.0 * a - x_f) / np.sqrt(p1**2 - 2.0 * v0)
    return out[()] if np.ndim(out) == 0 else out


def inside_ghost(q, x_f, T, setup: PhysicalSetup) -> Trajectory:
    _check_start(q, setup)
    scalar = _scalar(q, x_f, T)
    q, x_f, T = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (q, x_f, T)])
    a = setup.a
    p1, p2 = solve_crossing(-(a + q), 3.0 * a - x_f, 0.0, T, setup.p_tilde)
    t1 = -(a + q) / p1
    t_in = T - t1
    t_fwd = 2.0 * a / p2
    action = _segment_action(setup, t1, p1, t_in, p2)
    m_qp = -((p1 / p2) * t_in + (p2 / p1) * t1) / setup.lam
    tangent = TangentElements(_out(-p2 / p1, scalar), _out(m_qp, scalar))
    return Trajectory(
        Region.INSIDE,
        Kind.GHOST,
        _out(p1, scalar),
        _out(action, scalar),
        tangent,
        (
            (_out(t1, scalar), _out(p1, scalar)),
            (_out(t_fwd, scalar), _out(p2, scalar)),
            (_out(t_in - t_fwd, scalar), _out(-p2, scalar)),
        ),
        p_inside=_out(p2, scalar),
    )


# ---------------------------------------------------------------------------
# after the barrier


def solve_p1_after(q, x, T, setup: PhysicalSetup):
    """Initial momentum of the trajectory that crosses the whole barrier."""
    _check_start(q, setup)
    p1, _ = solve_crossing(-(setup.a + np.asarray(q)), 2.0 * setup.a, np.asarray(x) - setup.a, T, setup.p_tilde)
    return p1


def action_after(p1, q, x, setup: PhysicalSetup):
    p1 = np.asarray(p1, dtype=float)
    if np.any(p1 <= setup.p_tilde):
        raise ValueError("p1 must exceed the critical momentum")
    a, v0 = setup.a, setup.v0
    p2 = np.sqrt(p1**2 - 2.0 * v0)
    out = 0.5 * (x - q - 2.0 * a) * p1 + a * p2 - 2.0 * a * v0 / p2
    return out[()] if np.ndim(out) == 0 else out


def after_direct(q, x, T, setup: PhysicalSetup) -> Trajectory:
    _check_start(q, setup)
    scalar = _scalar(q, x, T)
    q, x, T = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (q, x, T)])
    a = setup.a
    p1, p2 = solve_crossing(-(a + q), np.full_like(x, 2.0 * a), x - a, T, setup.p_tilde)
    t1 = -(a + q) / p1
    t2 = 2.0 * a / p2
    t3 = T - t1 - t2
    action = _segment_action(setup, t1, p1, t2, p2, t3)
    m_qp = (t1 + t3 + (p1 / p2) ** 2 * t2) / setup.lam
    tangent = TangentElements(_out(np.ones_like(p1), scalar), _out(m_qp, scalar))
    return Trajectory(
        Region.AFTER,
        Kind.DIRECT,
        _out(p1, scalar),
        _out(action, scalar),
        tangent,
        (
            (_out(t1, scalar), _out(p1, scalar)),
            (_out(t2, scalar), _out(p2, scalar)),
            (_out(t3, scalar), _out(p1, scalar)),
        ),
        p_inside=_out(p2, scalar),
    )


# ---------------------------------------------------------------------------
# tangent matrix from the action


def tangent_from_action(
    action_evaluator: Callable[[float, float], float],
    q: float,
    x_f: float,
    setup: PhysicalSetup,
    *,
    scheme: str = "central",
    step: float | None = None,
) -> TangentElements:
    """Tangent-matrix elements from finite differences of ``S(x_i, x_f)``.

    ``m_qq = -S_ii / S_if`` and ``m_qp = -(c/b) / S_if``.  ``scheme`` is
    ``"central"`` (default) or ``"forward"``; the default step is
    ``1e-5 * max(1, |x|)`` per coordinate.
    """
    hi = step if step is not None else 1e-5 * max(1.0, abs(q))
    hf = step if step is not None else 1e-5 * max(1.0, abs(x_f))
    S = action_evaluator
    if scheme == "central":
        s00 = S(q, x_f)
        s_ii = (S(q + hi, x_f) - 2.0 * s00 + S(q - hi, x_f)) / hi**2
        s_if = (S(q + hi, x_f + hf) - S(q + hi, x_f - hf) - S(q - hi, x_f + hf) + S(q - hi, x_f - hf)) / (4.0 * hi * hf)
    elif scheme == "forward":
        s00 = S(q, x_f)
        s_ii = (S(q + 2 * hi, x_f) - 2.0 * S(q + hi, x_f) + s00) / hi**2
        s_if = (S(q + hi, x_f + hf) - S(q + hi, x_f) - S(q, x_f + hf) + s00) / (hi * hf)
    else:
        raise ValueError(f"unknown finite-difference scheme {scheme!r}")
    ratio = setup.c / setup.b
    if not math.isfinite(s_if) or abs(s_if) < 1e-8 * ratio:
        raise FocalPointError(f"S_if={s_if!r} is too close to zero")
    return TangentElements(-s_ii / s_if, -ratio / s_if)


def tangent_from_trajectory(traj: Trajectory, q: float, x_f: float, T: float, setup: PhysicalSetup, **kw) -> TangentElements:
    """Finite-difference tangent elements for a trajectory's region and kind."""
    if traj.region is Region.BEFORE and traj.kind is Kind.DIRECT:
        def S(xi, xf):
            return (xf - xi) ** 2 / (2.0 * T)
    elif traj.region is Region.BEFORE and traj.kind is Kind.REFLECTED:
        def S(xi, xf):
            return (xf + xi + 2.0 * setup.a) ** 2 / (2.0 * T)
    elif traj.region is Region.INSIDE and traj.kind is Kind.DIRECT:
        def S(xi, xf):
            return inside_direct(xi, xf, T, setup).action
    elif traj.kind is Kind.GHOST:
        def S(xi, xf):
            return inside_ghost(xi, xf, T, setup).action
    else:
        def S(xi, xf):
            return after_direct(xi, xf, T, setup).action
    return tangent_from_action(S, q, x_f, setup, **kw)
