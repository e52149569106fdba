"""Exact quantum propagation of a coherent state through the square barrier.

Two independent propagators:

* :func:`propagate_split_step` -- second-order Strang splitting on a periodic
  FFT grid.  Simple and manifestly unitary, but the step potential limits its
  refinement self-convergence to roughly 1e-5.
* :class:`ScatteringExpansion` -- expansion in the stationary scattering
  states of the barrier, integrated in ``k`` with Gauss-Legendre panels.  It
  is exact up to quadrature error and is the default reference for
  comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from semitunnel.core import CoherentState, PhysicalSetup, coherent_amplitude


class ConvergenceError(RuntimeError):
    """Raised when a propagation loses unitarity."""


@dataclass
class GridState:
    x0: float
    dx: float
    n: int
    values: np.ndarray
    t: float = 0.0

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density) * self.dx)


@dataclass(frozen=True)
class GridParams:
    """Resolution knobs: ``dx = b / dx_divisor``, ``dt <= dt_factor * hbar / V0``."""

    dx_divisor: float = 16.0
    dt_factor: float = 0.01
    t_max: float | None = None
    norm_tol: float = 1e-6

    def refined(self, factor: float = 2.0) -> "GridParams":
        return replace(self, dx_divisor=self.dx_divisor * factor, dt_factor=self.dt_factor / factor)


def domain_bounds(state: CoherentState, t_max: float):
    s = state.setup
    w = 12.0 * s.b * math.sqrt(1.0 + (t_max / s.lam) ** 2)
    lo = state.q - w
    hi = state.q + abs(state.p) * t_max + 2.0 * s.a + w
    return min(lo, -s.a - w), max(hi, s.a + w)


def make_grid(state: CoherentState, t_max: float, dx: float) -> tuple[float, int]:
    """Left edge and power-of-two size of a grid with nodes on ``x = +-a``."""
    lo, hi = domain_bounds(state, t_max)
    a = state.setup.a
    n_left = math.ceil((-a - lo) / dx)
    n = 1 << max(4, math.ceil(math.log2(n_left + (hi + a) / dx + 1)))
    return -a - n_left * dx, n


def barrier_potential(x, setup: PhysicalSetup, dx: float | None = None):
    """Pointwise barrier; nodes within ``dx*1e-9`` of an edge get ``V0/2``."""
    x = np.asarray(x, dtype=float)
    tol = 1e-9 * (dx if dx else 1.0)
    V = np.where(np.abs(x) < setup.a, setup.v0, 0.0)
    return np.where(np.abs(np.abs(x) - setup.a) <= tol, 0.5 * setup.v0, V)


def propagate_split_step(initial: CoherentState, T: float, params: GridParams | None = None) -> GridState:
    s = initial.setup
    params = params or GridParams()
    if T < 0:
        raise ValueError("T must be non-negative")
    dx = s.b / params.dx_divisor
    x0, n = make_grid(initial, params.t_max if params.t_max is not None else T, dx)
    x = x0 + dx * np.arange(n)
    psi = coherent_amplitude(x, initial).astype(complex)
    if T == 0:
        return GridState(x0, dx, n, psi, 0.0)
    dt_max = params.dt_factor * s.hbar / s.v0
    nsteps = max(1, math.ceil(T / dt_max - 1e-9))
    dt = T / nsteps
    half_v = np.exp(-0.5j * barrier_potential(x, s, dx) * dt / s.hbar)
    k = 2.0 * np.pi * np.fft.fftfreq(n, dx)
    kin = np.exp(-0.5j * s.hbar * k**2 * dt / s.mass)
    norm0 = float(np.sum(np.abs(psi) ** 2) * dx)
    # fuse adjacent half potential kicks
    full_v = half_v * half_v
    psi = half_v * psi
    for i in range(nsteps):
        psi = np.fft.ifft(kin * np.fft.fft(psi))
        psi = psi * (half_v if i == nsteps - 1 else full_v)
    out = GridState(x0, dx, n, psi, T)
    if abs(out.norm() - norm0) > params.norm_tol:
        raise ConvergenceError(f"norm drifted by {out.norm() - norm0:.3e}")
    return out


def density_at(grid: GridState, x):
    x = np.asarray(x, dtype=float)
    xs = grid.x
    if np.any(x < xs[0]) or np.any(x > xs[-1]):
        raise ValueError("x outside the grid domain")
    return np.interp(x, xs, grid.density)


def free_packet(x, T, state: CoherentState):
    """Analytic free evolution of the coherent state (unit mass)."""
    s = state.setup
    x = np.asarray(x, dtype=float)
    w = 1.0 + 1j * T / s.lam
    return (
        math.pi**-0.25
        / math.sqrt(s.b)
        / np.sqrt(w)
        * np.exp(
            -((x - state.q - state.p * T) ** 2) / (2.0 * s.b**2 * w)
            + 1j * state.p * (x - 0.5 * state.q) / s.hbar
            - 0.5j * state.p**2 * T / s.hbar
        )
    )


# ---------------------------------------------------------------------------
# plane-wave coefficients


def _sinc(z):
    # sin(z)/z for complex z, safe at 0
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z * z / 6.0, np.sin(zs) / zs)


def transmission_probability(k, setup: PhysicalSetup):
    """Exact ``|t(k)|^2`` for the square barrier of width ``2a``."""
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    E = 0.5 * (setup.hbar * k) ** 2 / setup.mass
    out = np.where(E < setup.v0, _transmission_below(k, setup), _transmission_above(k, setup))
    return out[()] if out.ndim == 0 else out


def _transmission_below(k, setup: PhysicalSetup):
    # tunnelling form, written with sinh(x)/x so that E -> V0 is regular
    k = np.asarray(k, dtype=float)
    E = 0.5 * (setup.hbar * k) ** 2 / setup.mass
    kappa = np.sqrt(np.maximum(2.0 * setup.mass * (setup.v0 - E), 0.0)) / setup.hbar
    L = 2.0 * setup.a
    with np.errstate(over="ignore"):
        shc = np.where(kappa * L < 1e-8, 1.0, np.sinh(kappa * L) / np.where(kappa > 0, kappa * L, 1.0))
        extra = setup.v0**2 * L**2 * shc**2 * 2.0 * setup.mass / (4.0 * E * setup.hbar**2)
    return 1.0 / (1.0 + extra)


def _transmission_above(k, setup: PhysicalSetup):
    k = np.asarray(k, dtype=float)
    E = 0.5 * (setup.hbar * k) ** 2 / setup.mass
    kp = np.sqrt(np.maximum(2.0 * setup.mass * (E - setup.v0), 0.0)) / setup.hbar
    L = 2.0 * setup.a
    snc = np.real(_sinc(kp * L))
    extra = setup.v0**2 * L**2 * snc**2 * 2.0 * setup.mass / (4.0 * E * setup.hbar**2)
    return 1.0 / (1.0 + extra)


def _barrier_terms(k, setup: PhysicalSetup):
    """Shared pieces of the left-incident stationary state.

    Returns ``kappa``, the scale ``m = |Im(2 kappa a)|`` and the scaled
    denominator ``D`` such that ``t = exp(-2ika - m) / D``.
    """
    k = np.asarray(k, dtype=float)
    kt = setup.p_tilde / setup.hbar
    kappa = np.sqrt(k * k - kt * kt + 0j)
    L = 2.0 * setup.a
    z = kappa * L
    m = np.abs(z.imag)
    ep, em = np.exp(1j * z - m), np.exp(-1j * z - m)
    cos_s, sin_s = 0.5 * (ep + em), -0.5j * (ep - em)
    small = np.abs(z) < 1e-8
    # sin(kappa L)/kappa, scaled
    sk = np.where(small, L * np.exp(-m), sin_s / np.where(small, 1.0, kappa))
    denom = cos_s - 0.5j * (k * k + kappa * kappa) / k * sk
    return kappa, m, denom, cos_s, sk


def scattering_coefficients(k, setup: PhysicalSetup):
    """Amplitudes ``(t, r)`` of the left-incident stationary state.

    Left of the barrier ``e^{ikx} + r e^{-ikx}``, right of it ``t e^{ikx}``.
    """
    k = np.asarray(k, dtype=float)
    L = 2.0 * setup.a
    _, m, denom, cos_s, sk = _barrier_terms(k, setup)
    phase = np.exp(-1j * k * L)
    t = phase * np.exp(-m) / denom
    r = phase * ((cos_s - 1j * k * sk) / denom - 1.0)
    return t, r


def _inside_log_coefficients(k, setup: PhysicalSetup):
    """Log-amplitudes of ``exp(+-i kappa (x - a))`` inside the barrier.

    ``chi_L(x) = alpha e^{i kappa (x-a)} + beta e^{-i kappa (x-a)}`` for
    ``|x| <= a``; logs keep the exponentially large and small factors apart.
    """
    kappa, m, denom, _, _ = _barrier_terms(k, setup)
    ratio = k / kappa
    base = -1j * k * setup.a - m - np.log(denom)
    with np.errstate(divide="ignore"):
        return kappa, base + np.log(0.5 * (1.0 + ratio)), base + np.log(0.5 * (1.0 - ratio))


class ScatteringExpansion:
    """Exact ``<x|exp(-iHT/hbar)|z>`` from the stationary scattering states.

    ``psi(x, T) = int_0^inf dk/2pi [c_L chi_L + c_R chi_R] exp(-i hbar k^2 T/2)``
    with ``c_L = phi(k) + r* phi(-k)``, ``c_R = t* phi(-k)``, ``chi_R(x) =
    chi_L(-x)`` and ``phi`` the plane-wave transform of the initial state.
    Valid when the packet starts well clear of the barrier.

    Near the barrier top the coefficients have a square-root branch point,
    so the quadrature runs in ``kappa = sqrt(k^2 - k_t^2)`` above it and in
    ``sqrt(k_t^2 - k^2)`` just below it, where the integrand is smooth.
    """

    nodes_per_panel = 24

    def __init__(self, state: CoherentState, panel_scale: float = 1.0, width: float = 9.0):
        s = state.setup
        if (-s.a - state.q) / s.b < 8.0:
            raise ValueError("the initial packet must start at least 8 widths left of the barrier")
        self.state = state
        self.panel_scale = float(panel_scale)
        k0 = state.p / s.hbar
        self.k_lo = max(0.0, abs(k0) - width / s.b)
        self.k_hi = abs(k0) + width / s.b

    def _phi(self, k):
        st, s = self.state, self.state.setup
        k0 = st.p / s.hbar
        return (
            math.pi**-0.25
            * math.sqrt(2.0 * math.pi * s.b)
            * np.exp(1j * st.p * st.q / (2.0 * s.hbar) - 1j * k * st.q - 0.5 * s.b**2 * (k - k0) ** 2)
        )

    def nodes(self, x_extent: float, T: float):
        """Quadrature nodes and weights in ``k`` for points with ``|x| <= x_extent``."""
        s = self.state.setup
        omega = x_extent + abs(self.state.q) + 4.0 * s.a + s.hbar * self.k_hi * T
        width = 20.0 / (omega * self.panel_scale)
        kt = s.p_tilde / s.hbar
        g, gw = leggauss(self.nodes_per_panel)

        def panels(lo, hi, step=None):
            if step is None:
                edges = np.linspace(lo, hi, max(1, math.ceil((hi - lo) / width)) + 1)
            else:
                edges = [lo]
                while edges[-1] < hi:
                    edges.append(min(hi, edges[-1] + step(edges[-1])))
                edges = np.array(edges)
            half = 0.5 * np.diff(edges)[:, None]
            mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
            return (mid + half * g).ravel(), (half * gw).ravel()

        ks, ws = [], []
        lo, hi = self.k_lo, min(self.k_hi, 0.5 * kt)
        if hi > lo:
            k, w = panels(lo, hi)
            ks.append(k), ws.append(w)
        lo, hi = max(self.k_lo, 0.5 * kt), min(self.k_hi, kt)
        if hi > lo:
            u, w = panels(math.sqrt(kt * kt - hi * hi), math.sqrt(kt * kt - lo * lo))
            k = np.sqrt(kt * kt - u * u)
            ks.append(k), ws.append(w * u / k)
        lo, hi = max(self.k_lo, kt), self.k_hi
        if hi > lo:
            v, w = panels(math.sqrt(lo * lo - kt * kt), math.sqrt(hi * hi - kt * kt), self._resonance_step(width))
            k = np.sqrt(kt * kt + v * v)
            ks.append(k), ws.append(w * v / k)
        return np.concatenate(ks), np.concatenate(ws)

    def _resonance_step(self, width):
        """Panel width in ``kappa`` that resolves the over-barrier resonances.

        The resonance poles sit ``ln(1/r_e)/L`` below the real axis, with
        ``r_e = (k - kappa)/(k + kappa)`` the single-edge reflection; panels
        are kept a few pole distances wide, which grades them toward threshold.
        """
        s = self.state.setup
        kt = s.p_tilde / s.hbar
        L = 2.0 * s.a
        first = 0.5 * math.pi / L

        def step(v):
            k = math.sqrt(kt * kt + v * v)
            d = math.log((k + v) / (k - v)) / L if v > 0 else 0.0
            floor = 0.25 * first if v < first else 0.0
            # the Jacobian kappa/k has branch points at +-i k_t
            jac = 0.5 * max(v, kt)
            return min(width, max(3.4 * d, floor) / self.panel_scale, jac / self.panel_scale)

        return step

    def psi(self, x, T):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k, w = self.nodes(float(np.max(np.abs(x))) if x.size else 0.0, T)
        return self._evaluate(x, k, w, T, dx=None)

    def grid(self, x0: float, dx: float, n: int, T: float) -> GridState:
        x = x0 + dx * np.arange(n)
        k, w = self.nodes(max(abs(x[0]), abs(x[-1])), T)
        return GridState(x0, dx, n, self._evaluate(x, k, w, T, dx=dx), T)

    def psi_series(self, x: float, T, block: int = 64):
        """``psi(x, T)`` at one point outside the barrier for many times."""
        s = self.state.setup
        if abs(x) <= s.a:
            raise ValueError("psi_series needs |x| > a")
        T = np.atleast_1d(np.asarray(T, dtype=float))
        k, w = self.nodes(abs(x), float(T.max()))
        t, r = scattering_coefficients(k, s)
        phi_p, phi_m = self._phi(k), self._phi(-k)
        w = w / (2.0 * np.pi)
        cl = (phi_p + np.conj(r) * phi_m) * w
        cr = np.conj(t) * phi_m * w
        if x < -s.a:
            spatial = cl * np.exp(1j * k * x) + (cl * r + cr * t) * np.exp(-1j * k * x)
        else:
            spatial = (cl * t + cr * r) * np.exp(1j * k * x) + cr * np.exp(-1j * k * x)
        out = np.empty(T.size, dtype=complex)
        energy = 0.5 * s.hbar * k * k / s.mass
        for lo in range(0, T.size, block):
            out[lo : lo + block] = np.exp(-1j * np.outer(T[lo : lo + block], energy)) @ spatial
        return out

    def _evaluate(self, x, k, w, T, dx):
        s = self.state.setup
        a = s.a
        t, r = scattering_coefficients(k, s)
        phi_p, phi_m = self._phi(k), self._phi(-k)
        evo = w / (2.0 * np.pi) * np.exp(-0.5j * s.hbar * k * k * T / s.mass)
        cl = (phi_p + np.conj(r) * phi_m) * evo
        cr = np.conj(t) * phi_m * evo
        out = np.zeros(x.shape, dtype=complex)
        left, right = x < -a, x > a
        inside = ~(left | right)
        with np.errstate(divide="ignore"):
            for mask, A, B in ((left, cl, cl * r + cr * t), (right, cl * t + cr * r, cr)):
                if np.any(mask):
                    out[mask] = _plane_sum(np.log(A), k, x[mask], dx) + _plane_sum(np.log(B), -k, x[mask], dx)
            if np.any(inside):
                kappa, la, lb = _inside_log_coefficients(k, s)
                lcl, lcr = np.log(cl), np.log(cr)
                xi = x[inside]
                # chi_R(x) = chi_L(-x): the same exponentials with shifts -a
                out[inside] = (
                    _plane_sum(lcl + la - 1j * kappa * a, kappa, xi, dx)
                    + _plane_sum(lcl + lb + 1j * kappa * a, -kappa, xi, dx)
                    + _plane_sum(lcr + la - 1j * kappa * a, -kappa, xi, dx)
                    + _plane_sum(lcr + lb + 1j * kappa * a, kappa, xi, dx)
                )
        return out


def _plane_sum(log_coef, k, x, dx=None):
    """``sum_j exp(log_coef_j + i k_j x)`` for every x (``k`` may be complex).

    On a uniform grid the exponential factorises over blocks of points, which
    turns the sum into a single matrix product.
    """
    x = np.asarray(x, dtype=float)
    if dx is not None and x.size > 64:
        # keep the in-block growth factor exp(|Im k| * block * dx) modest
        grow = float(np.max(np.abs(np.imag(k)))) * dx
        block = max(1, min(int(math.sqrt(x.size)) + 1, int(30.0 / grow) if grow > 0 else x.size))
        nb = -(-x.size // block)
        starts = x[0] + dx * block * np.arange(nb)
        head = np.exp(log_coef[None, :] + 1j * starts[:, None] * k[None, :])
        tail = np.exp(1j * (dx * np.arange(block))[None, :] * k[:, None])
        return (head @ tail).ravel()[: x.size]
    out = np.empty(x.size, dtype=complex)
    for lo in range(0, x.size, 512):
        xs = x[lo : lo + 512]
        out[lo : lo + 512] = np.exp(log_coef[None, :] + 1j * xs[:, None] * k[None, :]).sum(axis=1)
    return out


def exact_reference_grid(state: CoherentState, T: float, dx_divisor: float = 16.0, t_max: float | None = None, panel_scale: float = 1.0) -> GridState:
    """Scattering-expansion wavefunction on the standard propagation grid."""
    dx = state.setup.b / dx_divisor
    x0, n = make_grid(state, t_max if t_max is not None else T, dx)
    return ScatteringExpansion(state, panel_scale).grid(x0, dx, n, T)


def exact_density(x, T, state: CoherentState, method: str = "expansion", params: GridParams | None = None):
    """Exact density at arbitrary points.

    ``method="expansion"`` evaluates the scattering expansion directly;
    ``"split_step"`` interpolates a split-step grid.
    """
    if method == "expansion":
        return np.abs(ScatteringExpansion(state).psi(x, T)) ** 2
    if method == "split_step":
        return density_at(propagate_split_step(state, T, params), x)
    raise ValueError(f"unknown method {method!r}")
