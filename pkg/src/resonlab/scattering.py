"""Incoming scattering states, well couplings and energy-window integrals.

States come in two flavours:

* the bare incoming state ``psi(k, x)`` of the barrier-with-interfaces
  Hamiltonian (no well), with reflection/transmission amplitudes R, T;
* the full driven state at frozen coupling, obtained from it by the rank-one
  well correction  psi + C * G(., c)  with

      C(k, t) = - h*alpha_t * psi(k, c) / (1 + h*alpha_t * G^{k^2}(c, c)).

|C|^2 is a Lorentzian of half-width Gamma_t in the energy variable k^2,
centred near the resonance; the integrals of g*|C|^2 over the window feed the
reduced charge model.

R and T derivation (the closed forms used below).  Write the interior part
as the two-exponential combination fixed by the outgoing Robin condition at
b; matching through the interface factors e^{-theta0/2} (values) and
e^{-3*theta0/2} (derivatives) against  exp(ikx/h) + R exp(-ikx/h)  on the
left and  T exp(ikx/h)  on the right gives, with p the interface reflection
factor, El = exp(-2j*Lam*l/h) and D = 1 - p^2*El:

    psi_in(x) = (1-p) e^{ika/h} e^{-theta0/2} e^{-i Lam (x-a)/h}
                * [1 + p e^{-2j Lam (b-x)/h}] / D,
    T = (1 - p^2) e^{-ikl/h} e^{-j Lam l/h} / D,
    R = e^{2ika/h} [ (1-p)(1 + p*El)/D - 1 ].

Sanity anchors: for a transparent barrier (V0 -> 0) these give T -> 1 and
R -> 0; at theta0 = 0 they satisfy |R|^2 + |T|^2 = 1 exactly.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import greens
from .model import AlphaProfile, ModelParams, PartitionFn
from .spectra import Resonance

__all__ = [
    "ScatteringState",
    "DeformedState",
    "scattering_state",
    "wave_value",
    "deformed_initial",
    "coupling_C",
    "coupling_C_via_pole",
    "coupling_C_dot",
    "coupling_C_dot_factored",
    "window_panels",
    "window_nodes",
    "lorentzian_integral",
]


class InteriorDegenerateError(ArithmeticError):
    """Raised when the interior denominator of the state degenerates."""


@dataclass(frozen=True)
class ScatteringState:
    """Bare incoming state at wavenumber k > 0 (closed form, cached factors)."""

    k: float
    params: ModelParams
    R: complex
    T: complex
    A_int: complex      # coefficient of cos(Lam*(x-b)/h - gamma)
    psi_c: complex      # interior value at the well point
    gamma: complex
    Lam: complex
    p: complex
    D: complex

    def value(self, x):
        return wave_value(self, x)


def scattering_state(k: float, params: ModelParams) -> ScatteringState:
    """Incoming state of the bare barrier at wavenumber k (energy k^2)."""
    if k <= 0.0:
        raise ValueError("k must be positive (incoming from the left)")
    z = k * k
    L = greens.Lam(z, params)
    gamma, p = greens.phase_factors(z, params)
    h, l = params.h, params.l
    El = np.exp(-2j * L * l / h)
    D = 1.0 - p * p * El
    if abs(D) < 1e-14:
        raise InteriorDegenerateError("interior-denominator-degenerate")
    pref = (1.0 - p) * cmath.exp(1j * k * params.a / h) * cmath.exp(-params.theta0 / 2.0)
    psi_c = pref * np.exp(-1j * L * (params.c - params.a) / h) \
        * (1.0 + p * np.exp(-2j * L * (params.b - params.c) / h)) / D
    T = (1.0 - p * p) * cmath.exp(-1j * k * l / h) * np.exp(-1j * L * l / h) / D
    R = cmath.exp(2j * k * params.a / h) * ((1.0 - p) * (1.0 + p * El) / D - 1.0)
    A_int = 2.0 * pref * np.exp(-1j * L * l / h) * cmath.exp(-1j * gamma) / D
    return ScatteringState(k=k, params=params, R=complex(R), T=complex(T),
                           A_int=complex(A_int), psi_c=complex(psi_c),
                           gamma=complex(gamma), Lam=complex(L), p=complex(p),
                           D=complex(D))


def wave_value(state: ScatteringState, x, derivative: int = 0):
    """Pointwise value (or first/second x-derivative) of the bare state.

    Interior: stable two-exponential product form; exterior: the plane waves
    with amplitudes R and T.
    """
    P = state.params
    a, b, c, h, l = P.a, P.b, P.c, P.h, P.l
    k, L, p, D = state.k, state.Lam, state.p, state.D
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    xi = np.clip(x, a, b)

    pref = (1.0 - p) * cmath.exp(1j * k * a / h) * cmath.exp(-P.theta0 / 2.0) / D
    e1 = np.exp(-1j * L * (xi - a) / h)
    e2 = np.exp(-1j * L * ((xi - a) + 2.0 * (b - xi)) / h)
    if derivative == 0:
        vals = pref * (e1 + p * e2)
    elif derivative == 1:
        vals = pref * ((-1j * L / h) * e1 + p * (1j * L / h) * e2)
    elif derivative == 2:
        vals = pref * (-(L / h) ** 2) * (e1 + p * e2)
    else:
        raise ValueError("derivative must be 0, 1 or 2")

    left = x < a
    right = x > b
    if left.any() or right.any():
        kk = 1j * k / h
        if derivative == 0:
            lv = np.exp(kk * x) + state.R * np.exp(-kk * x)
            rv = state.T * np.exp(kk * x)
        elif derivative == 1:
            lv = kk * np.exp(kk * x) - kk * state.R * np.exp(-kk * x)
            rv = kk * state.T * np.exp(kk * x)
        else:
            lv = kk**2 * (np.exp(kk * x) + state.R * np.exp(-kk * x))
            rv = kk**2 * state.T * np.exp(kk * x)
        vals = np.where(left, lv, vals)
        vals = np.where(right, rv, vals)
    return complex(vals[0]) if scalar else vals


def coupling_C(k: float, t: float, alpha: AlphaProfile, params: ModelParams,
               resonance: Resonance | None = None) -> complex:
    """Well-coupling coefficient C(k, t) = -h a_t psi(k,c) / (1 + h a_t G(c,c)).

    If the resonance at time t is supplied, evaluation closer to it than
    Gamma/100 in energy emits a "near-pole" warning (real k^2 never hits the
    complex pole exactly, but the Lorentzian is then badly sampled).
    """
    a_t = alpha.value(t)
    if a_t == 0.0:
        return 0.0 + 0.0j
    # real k^2 never reaches the complex pole itself (|k^2 - E| >= Gamma);
    # the diagnostic fires on proximity to the peak position E_R
    if resonance is not None and abs(k * k - resonance.E_R) < resonance.Gamma / 100.0:
        warnings.warn("near-pole: k^2 within Gamma/100 of the resonance peak",
                      stacklevel=2)
    st = scattering_state(k, params)
    G = greens.green_cc(k * k, params).value
    return complex(-params.h * a_t * st.psi_c / (1.0 + params.h * a_t * G))


def coupling_C_via_pole(k: float, t: float, alpha: AlphaProfile, params: ModelParams,
                        resonance: Resonance) -> complex:
    """Equivalent pole form C = -h a_t psi(k,c) M(k^2, E_t) / (k^2 - E_t)."""
    a_t = alpha.value(t)
    if a_t == 0.0:
        return 0.0 + 0.0j
    st = scattering_state(k, params)
    M = greens.pole_factor(k * k, resonance.E, a_t, params)
    return complex(-params.h * a_t * st.psi_c * M / (k * k - resonance.E))


def coupling_C_dot(k: float, t: float, alpha: AlphaProfile,
                   params: ModelParams) -> complex:
    """Time derivative of C(k, t), by direct differentiation:

        dC/dt = - h * alpha_dot * psi(k,c) / (1 + h*alpha_t*G(c,c))^2 .
    """
    a_t = alpha.value(t)
    adot = alpha.dot(t)
    if adot == 0.0:
        return 0.0 + 0.0j
    st = scattering_state(k, params)
    G = greens.green_cc(k * k, params).value
    return complex(-params.h * adot * st.psi_c / (1.0 + params.h * a_t * G) ** 2)


def coupling_C_dot_factored(k: float, t: float, alpha: AlphaProfile,
                                params: ModelParams) -> complex:
    """Alternative factored expression with the extra (2 h a G - 1) term.

    Kept only as a diagnostic: it does NOT equal the direct derivative of
    C(k, t); callers can log the ratio to quantify the discrepancy between
    the two readings.
    """
    a_t = alpha.value(t)
    adot = alpha.dot(t)
    st = scattering_state(k, params)
    G = greens.green_cc(k * k, params).value
    return complex(params.h * adot * st.psi_c * (2.0 * params.h * a_t * G - 1.0)
                   / (1.0 + params.h * a_t * G) ** 2)


@dataclass(frozen=True)
class DeformedState:
    """Dilated driven state U psi = U psi_bare + C * G(., c) at frozen coupling.

    The dilation acts as  e^{theta/2} u(e^theta (x - edge) + edge)  outside
    (a, b) and as the identity inside; the Green tail is already outgoing, so
    only the bare part needs explicit dilation.
    """

    state: ScatteringState
    C: complex
    theta: complex

    @property
    def k(self) -> float:
        return self.state.k

    def value(self, x):
        P = self.state.params
        a, b, h = P.a, P.b, P.h
        k = self.state.k
        th = self.theta
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)

        vals = np.asarray(wave_value(self.state, np.clip(x, a, b)), dtype=complex)
        left = x < a
        right = x > b
        if left.any() or right.any():
            amp = cmath.exp(th / 2.0)
            ph = cmath.exp(th)
            kk = 1j * k / h
            lv = amp * (np.exp(kk * a) * np.exp(kk * ph * (x - a))
                        + self.state.R * np.exp(-kk * a) * np.exp(-kk * ph * (x - a)))
            rv = amp * self.state.T * np.exp(kk * b) * np.exp(kk * ph * (x - b))
            vals = np.where(left, lv, vals)
            vals = np.where(right, rv, vals)
        if self.C != 0.0:
            vals = vals + self.C * np.asarray(greens.green_xc(k * k, x, self.state.params),
                                              dtype=complex)
        return complex(vals[0]) if scalar else vals


def deformed_initial(k: float, alpha_value: float, params: ModelParams) -> DeformedState:
    """Dilated driven state at coupling ``alpha_value`` (the evolution input)."""
    st = scattering_state(k, params)
    if alpha_value == 0.0:
        C = 0.0 + 0.0j
    else:
        G = greens.green_cc(k * k, params).value
        C = complex(-params.h * alpha_value * st.psi_c
                    / (1.0 + params.h * alpha_value * G))
    return DeformedState(state=st, C=C, theta=params.theta0)


def window_panels(g: PartitionFn, peak_lo: float, peak_hi: float,
                  halfwidth: float) -> list[tuple[float, float]]:
    """Panel edges over supp g (in k), dyadically refined toward the peak.

    ``peak_lo``/``peak_hi`` and ``halfwidth`` are in the energy variable k^2;
    the core panel covers the resonance sweep, and panel widths double away
    from it until the window edges are reached.
    """
    k_lo, k_hi = g.k_range
    kp_lo = math.sqrt(max(peak_lo - halfwidth, 1e-12))
    kp_hi = math.sqrt(peak_hi + halfwidth)
    kp_lo = min(max(kp_lo, k_lo), k_hi)
    kp_hi = min(max(kp_hi, k_lo), k_hi)
    w = max(kp_hi - kp_lo, halfwidth / (2.0 * math.sqrt(peak_hi)), 1e-12)

    edges = [kp_lo, kp_hi]
    step = w
    x = kp_hi
    while x < k_hi:
        x = min(x + step, k_hi)
        edges.append(x)
        step *= 2.0
    step = w
    x = kp_lo
    while x > k_lo:
        x = max(x - step, k_lo)
        edges.insert(0, x)
        step *= 2.0
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)
            if edges[i + 1] > edges[i] + 1e-15]


def window_nodes(g: PartitionFn, peak_lo: float, peak_hi: float, halfwidth: float,
                 order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on the dyadic panels of :func:`window_panels`."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    ks, ws = [], []
    for lo, hi in window_panels(g, peak_lo, peak_hi, halfwidth):
        mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        ks.append(mid + half * xg)
        ws.append(half * wg)
    return np.concatenate(ks), np.concatenate(ws)


def _window_integrand(k_nodes: np.ndarray, t: float, alpha: AlphaProfile,
                      g: PartitionFn, params: ModelParams) -> np.ndarray:
    vals = np.empty_like(k_nodes)
    for i, k in enumerate(k_nodes):
        C = coupling_C(float(k), t, alpha, params)
        vals[i] = abs(C) ** 2
    return g(k_nodes) * vals / (2.0 * math.pi * params.h)


def lorentzian_integral(t: float, alpha: AlphaProfile, g: PartitionFn,
                        params: ModelParams, resonance: Resonance | None = None,
                        rel_tol: float = 1e-8, max_level: int = 7) -> float:
    """Energy-window integral  I(t) = int dk/(2 pi h) g(k) |C(k, t)|^2.

    Composite Gauss-Legendre with node clustering near the Lorentzian peak;
    the order is raised until two consecutive estimates agree to ``rel_tol``.
    In the thin-left-barrier case I(t) approaches (h |alpha_t|^3 / 2) *
    g(sqrt(lambda_t)) as h decreases.
    """
    if resonance is None:
        from .spectra import find_resonance
        resonance = find_resonance(alpha.value(t), params)
    prev = None
    for level in range(max_level):
        order = 12 * 2**level
        k, w = window_nodes(g, resonance.E_R, resonance.E_R,
                            max(resonance.Gamma, 1e-14), order=order)
        val = float(np.sum(w * _window_integrand(k, t, alpha, g, params)))
        if prev is not None and abs(val - prev) <= rel_tol * max(abs(val), 1e-300):
            return val
        prev = val
    raise ArithmeticError(
        f"quadrature did not stabilise to {rel_tol:g} (last value {prev:.6e})")
