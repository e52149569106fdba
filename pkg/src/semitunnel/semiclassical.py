"""Semiclassical wavefunction built from real trajectories.

Each trajectory contributes

    psi = b^-1/2 pi^-1/4 (m_qq + i m_qp)^-1/2
          exp[i S/hbar + i p q/(2 hbar) - (i m_qp / 2(m_qq + i m_qp)) ((p - p_i)/c)^2]

(principal square root).  Amplitudes are handled as complex logarithms so
that far-tail contributions underflow gracefully instead of producing NaN.

Edge phases glue the three regions together:

* left edge ``x = -a``: the reflected trajectory gets an extra phase
  ``theta`` so that ``|psi_d + e^{i theta} psi_r| = |psi_inside|``; the inside
  wavefunction gets ``xi`` so the complex value is continuous.  Only the
  direct inside trajectory enters here; the attenuated ghost is small at
  ``-a`` and is left out.
* right edge ``x = a`` (ghost mode): the ghost trajectory, attenuated by the
  plane-wave coefficient ``rho``, gets ``theta'`` so that the density is
  continuous with the after-barrier one; ``xi'`` does the same for the phase.

Reflected and ghost amplitudes are first rotated by a constant so that they
coincide with the direct amplitude at their bounce edge; ``theta`` and
``theta'`` are relative to that alignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from semitunnel.core import CoherentState, PhysicalSetup
from semitunnel.trajectories import (
    FocalPointError,
    Kind,
    Region,
    Trajectory,
    after_direct,
    critical_time,
    direct_before,
    inside_direct,
    inside_ghost,
    reflected_before,
    reflected_exists,
)


@dataclass(frozen=True)
class EdgePhases:
    """Phase corrections for one ``(state, T)``.

    ``theta``/``theta_prime`` are NaN when the corresponding interference is
    absent.  ``align`` and ``align_ghost`` rotate the reflected and ghost
    amplitudes onto the direct one at ``-a`` and ``+a`` respectively.
    """

    theta: float = math.nan
    xi: float = 0.0
    amplitude_ratio: float = math.nan
    theta_fallback: bool = False
    align: float = 0.0
    theta_prime: float = math.nan
    xi_prime: float = 0.0
    amplitude_ratio_plus: float = math.nan
    rho_edge: float = math.nan
    align_ghost: float = 0.0
    with_ghost: bool = False


@dataclass
class SemiclassicalField:
    x: np.ndarray
    amplitude: np.ndarray
    density: np.ndarray
    contributions: list = field(default_factory=list)
    phases: EdgePhases | None = None


# ---------------------------------------------------------------------------
# single-trajectory amplitude


def log_psi_from_trajectory(traj: Trajectory, state: CoherentState):
    """Complex logarithm of a trajectory's contribution.

    Returns ``-inf`` real part where the prefactor diverges (``m_qp``
    infinite); raises :class:`FocalPointError` where ``m_qq + i m_qp = 0``.
    """
    s = state.setup
    mqq = np.asarray(traj.tangent.m_qq, dtype=float)
    mqp = np.asarray(traj.tangent.m_qp, dtype=float)
    p_i = np.asarray(traj.p_i, dtype=float)
    S = np.asarray(traj.action, dtype=float)
    infinite = np.isinf(mqp)
    mqp_f = np.where(infinite, 1.0, mqp)
    m = mqq + 1j * mqp_f
    # NaN comes from 0 * inf in the tangent: the caustic where both elements vanish
    if np.any(((m == 0) | np.isnan(m)) & ~infinite):
        raise FocalPointError("m_qq + i m_qp vanishes")
    dp = (state.p - p_i) / s.c
    out = (
        -0.5 * math.log(s.b)
        - 0.25 * math.log(math.pi)
        - 0.5 * np.log(m)
        + 1j * (S / s.hbar + state.p * state.q / (2.0 * s.hbar))
        - 0.5 * (1j * mqp_f / m) * dp**2
    )
    out = np.where(infinite, complex(-np.inf, 0.0), out)
    return out[()] if out.ndim == 0 else out


def psi_from_trajectory(traj: Trajectory, state: CoherentState):
    """Contribution of one real trajectory to the wavefunction."""
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        lp = log_psi_from_trajectory(traj, state)
        out = np.where(np.isneginf(np.real(lp)), 0.0 + 0.0j, np.exp(lp))
    return out[()] if np.ndim(out) == 0 else out


def trajectory_density(traj: Trajectory, state: CoherentState):
    """Single-trajectory density in the closed Gaussian form.

    ``(b sqrt(pi))^-1 |m|^-1 exp[-m_qp^2/|m|^2 ((p - p_i)/c)^2]``.
    """
    s = state.setup
    mqq = np.asarray(traj.tangent.m_qq, dtype=float)
    mqp = np.asarray(traj.tangent.m_qp, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        mod2 = mqq**2 + mqp**2
        expo = -(mqp**2 / mod2) * ((state.p - np.asarray(traj.p_i)) / s.c) ** 2
        out = np.exp(expo) / (s.b * math.sqrt(math.pi) * np.sqrt(mod2))
    out = np.where(np.isinf(mqp), 0.0, out)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# edge phases


def rho_reflection(p1, setup: PhysicalSetup):
    """Plane-wave reflection weight at the far edge for momentum ``p1``."""
    p1 = np.asarray(p1, dtype=float)
    if np.any(p1 <= setup.p_tilde):
        raise ValueError("p1 must exceed the critical momentum")
    ratio = np.sqrt(1.0 - (setup.p_tilde / p1) ** 2)
    out = (1.0 - ratio) / (1.0 + ratio)
    return out[()] if out.ndim == 0 else out


def theta_phase(A: float, rho: float = 1.0):
    """Extra phase making ``|1 + rho e^{i theta}| = A``.

    Returns ``(theta, shift, fallback)`` with ``theta`` in ``[0, pi]``,
    ``shift = arg(1 + rho e^{i theta})`` and ``fallback`` true when no real
    solution exists.  With ``rho = 1``: ``cos(theta) = A^2/2 - 1``; if that
    exceeds 1 the phase is set to 0.
    """
    if A < 0 or rho <= 0:
        raise ValueError("A must be non-negative and rho positive")
    cos_t = (A * A - 1.0 - rho * rho) / (2.0 * rho)
    fallback = False
    if cos_t > 1.0:
        theta, fallback = 0.0, True
    elif cos_t < -1.0:
        theta, fallback = math.pi, True
    else:
        theta = math.acos(cos_t)
    w = 1.0 + rho * complex(math.cos(theta), math.sin(theta))
    # at the node the argument is the limit along theta -> pi
    shift = math.atan2(w.imag, w.real) if abs(w) > 1e-300 else math.pi / 2.0
    return theta, shift, fallback


def _wrap(angle):
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def edge_phases(state: CoherentState, T: float, with_ghost: bool = False) -> EdgePhases:
    s = state.setup
    a, q = s.a, state.q
    kw = {}
    lp_in = complex(log_psi_from_trajectory(inside_direct(q, a, T, s), state))
    lp_after = complex(log_psi_from_trajectory(after_direct(q, a, T, s), state))
    shift_p = 0.0
    if with_ghost:
        ghost_a = inside_ghost(q, a, T, s)
        rho = float(rho_reflection(ghost_a.p_i, s))
        A_plus = math.exp(lp_after.real - lp_in.real)
        theta_p, shift_p, _ = theta_phase(A_plus, rho)
        align_g = _wrap(lp_in.imag - complex(log_psi_from_trajectory(ghost_a, state)).imag)
        kw.update(theta_prime=theta_p, amplitude_ratio_plus=A_plus, rho_edge=rho, align_ghost=align_g, with_ghost=True)

    lp_d = complex(log_psi_from_trajectory(direct_before(q, -a, T, s), state))
    try:
        lp_w = complex(log_psi_from_trajectory(inside_direct(q, -a, T, s), state))
    except FocalPointError:
        # T == T_c: the inside density diverges at the edge, so A -> inf
        lp_r = complex(log_psi_from_trajectory(reflected_before(q, -a, T, s), state))
        kw.update(theta=0.0, xi=0.0, amplitude_ratio=math.inf, theta_fallback=True, align=_wrap(lp_d.imag - lp_r.imag))
        kw.update(xi_prime=_wrap(lp_in.imag + shift_p - lp_after.imag))
        return EdgePhases(**kw)
    if T >= critical_time(q, s):
        lp_r = complex(log_psi_from_trajectory(reflected_before(q, -a, T, s), state))
        align = _wrap(lp_d.imag - lp_r.imag)
        A = math.exp(lp_w.real - lp_d.real) if math.isfinite(lp_w.real) else 0.0
        theta, shift, fallback = theta_phase(A)
        phi = lp_w.imag - lp_d.imag if A > 0 else 0.0
        kw.update(theta=theta, xi=_wrap(shift - phi), amplitude_ratio=A, theta_fallback=fallback, align=align)
    else:
        # no reflected partner: keep the phase continuous at -a
        kw.update(xi=_wrap(lp_d.imag - lp_w.imag) if math.isfinite(lp_w.real) else 0.0)
    kw.update(xi_prime=_wrap(kw["xi"] + lp_in.imag + shift_p - lp_after.imag))
    return EdgePhases(**kw)


# ---------------------------------------------------------------------------
# region densities


def _as_array(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def density_before(x_f, T, state: CoherentState, phases: EdgePhases | None = None) -> SemiclassicalField:
    """Direct plus (where it exists) reflected contribution for ``x_f <= -a``."""
    s = state.setup
    x = _as_array(x_f)
    if np.any(x > -s.a):
        raise ValueError("density_before needs x_f <= -a")
    ph = phases if phases is not None else edge_phases(state, T)
    psi_d = psi_from_trajectory(direct_before(state.q, x, T, s), state)
    exists = reflected_exists(state.q, x, T, s)
    contributions = [(Kind.DIRECT, psi_d)]
    total = psi_d.copy()
    if np.any(exists):
        refl = reflected_before(state.q, np.where(exists, x, -s.a), T, s)
        psi_r = psi_from_trajectory(refl, state) * np.exp(1j * (ph.theta + ph.align))
        psi_r = np.where(exists, psi_r, 0.0)
        contributions.append((Kind.REFLECTED, psi_r))
        total = total + psi_r
    return SemiclassicalField(x, total, np.abs(total) ** 2, contributions, ph)


def density_inside(x_f, T, state: CoherentState, with_ghost: bool = False, phases: EdgePhases | None = None) -> SemiclassicalField:
    """Direct inside trajectory, optionally with the attenuated ghost."""
    s = state.setup
    x = _as_array(x_f)
    if np.any(x < -s.a) or np.any(x > s.a):
        raise ValueError("density_inside needs -a <= x_f <= a")
    ph = phases if phases is not None else edge_phases(state, T, with_ghost)
    if with_ghost and not ph.with_ghost:
        raise ValueError("phases were computed without the ghost trajectory")
    glob = np.exp(1j * ph.xi)
    psi_d = psi_from_trajectory(inside_direct(state.q, x, T, s), state) * glob
    contributions = [(Kind.DIRECT, psi_d)]
    total = psi_d
    if with_ghost:
        ghost = inside_ghost(state.q, x, T, s)
        rho = rho_reflection(ghost.p_i, s)
        psi_g = rho * psi_from_trajectory(ghost, state) * np.exp(1j * (ph.theta_prime + ph.align_ghost)) * glob
        contributions.append((Kind.GHOST, psi_g))
        total = total + psi_g
    return SemiclassicalField(x, total, np.abs(total) ** 2, contributions, ph)


def density_after(x, T, state: CoherentState, phases: EdgePhases | None = None) -> SemiclassicalField:
    """Single transmitted trajectory for ``x >= a``."""
    s = state.setup
    x = _as_array(x)
    if np.any(x < s.a):
        raise ValueError("density_after needs x >= a")
    traj = after_direct(state.q, x, T, s)
    psi = psi_from_trajectory(traj, state)
    if phases is not None:
        psi = psi * np.exp(1j * phases.xi_prime)
    return SemiclassicalField(x, psi, np.abs(psi) ** 2, [(Kind.DIRECT, psi)], phases)


def semiclassical_field(x, T, state: CoherentState, with_ghost: bool = False, phases: EdgePhases | None = None) -> SemiclassicalField:
    """Evaluate the glued wavefunction on an arbitrary set of points.

    Points with ``|x| <= a`` use the inside formula, including both edges.
    """
    s = state.setup
    x = _as_array(x)
    ph = phases if phases is not None else edge_phases(state, T, with_ghost)
    amp = np.zeros(x.shape, dtype=complex)
    parts = {}
    for mask, fn in (
        (x < -s.a, lambda xs: density_before(xs, T, state, ph)),
        ((x >= -s.a) & (x <= s.a), lambda xs: density_inside(xs, T, state, with_ghost, ph)),
        (x > s.a, lambda xs: density_after(xs, T, state, ph)),
    ):
        if np.any(mask):
            f = fn(x[mask])
            amp[mask] = f.amplitude
            for kind, c in f.contributions:
                buf = parts.setdefault(kind, np.zeros(x.shape, dtype=complex))
                buf[mask] += c
    return SemiclassicalField(x, amp, np.abs(amp) ** 2, list(parts.items()), ph)


def semiclassical_density(x, T, state: CoherentState, with_ghost: bool = False):
    return semiclassical_field(x, T, state, with_ghost).density


def region_of(x, setup: PhysicalSetup):
    x = np.asarray(x)
    return np.where(x < -setup.a, Region.BEFORE, np.where(x > setup.a, Region.AFTER, Region.INSIDE))


# ---------------------------------------------------------------------------
# closed forms used as independent cross-checks


def before_density_closed_form(x_f, T, state: CoherentState, theta: float):
    """Three-term (or direct-only) density left of the barrier."""
    s = state.setup
    x = np.asarray(x_f, dtype=float)
    lam, b, a, q, p = s.lam, s.b, s.a, state.q, state.p
    w = lam**2 / (lam**2 + T**2)
    pre = 1.0 / (b * math.sqrt(math.pi) * math.sqrt(1.0 + T**2 / lam**2))
    direct = np.exp(-w * ((x - q - p * T) / b) ** 2)
    refl = np.exp(-w * ((x + q + p * T + 2.0 * a) / b) ** 2)
    cross = (
        2.0
        * np.cos(2.0 * (x + a) * (lam**2 * p - (q + a) * T) / (s.hbar * (lam**2 + T**2)) - theta)
        * np.exp(-w * ((p * T + q + a) ** 2 + (x + a) ** 2) / b**2)
    )
    exists = reflected_exists(q, x, T, s)
    return pre * np.where(exists, direct + refl + cross, direct)


def ghost_density_closed_form(direct: Trajectory, ghost: Trajectory, state: CoherentState, theta_prime: float, rho):
    """Direct/ghost interference density written out term by term."""
    s = state.setup
    c, hbar, p = s.c, s.hbar, state.p
    md_qq, md_qp = np.asarray(direct.tangent.m_qq), np.asarray(direct.tangent.m_qp)
    mr_qq, mr_qp = np.asarray(ghost.tangent.m_qq), np.asarray(ghost.tangent.m_qp)
    nd, nr = md_qq**2 + md_qp**2, mr_qq**2 + mr_qp**2
    ud = ((p - np.asarray(direct.p_i)) / c) ** 2
    ur = ((p - np.asarray(ghost.p_i)) / c) ** 2
    ed, er = md_qp**2 / nd * ud, mr_qp**2 / nr * ur
    dphi = (
        (np.asarray(ghost.action) - np.asarray(direct.action)) / hbar
        + 0.5 * np.arctan(md_qp / md_qq)
        - 0.5 * np.arctan(mr_qp / mr_qq)
        + 0.5 * md_qq * md_qp / nd * ud
        - 0.5 * mr_qq * mr_qp / nr * ur
    )
    pre = 1.0 / (s.b * math.sqrt(math.pi))
    return pre * (
        np.exp(-ed) / np.sqrt(nd)
        + rho**2 * np.exp(-er) / np.sqrt(nr)
        + 2.0 * rho * np.cos(dphi + theta_prime) * np.exp(-0.5 * ed - 0.5 * er) / (nd * nr) ** 0.25
    )
