"""Bare spectrum, resonance solver and resonance trajectories.

The driven model has a single long-lived state below the barrier top: the
complex root E = E_R - i*Gamma of

    F(E) = 1 + h * alpha * G^E(c, c) = 0,

continued to the lower half plane through the closed-form Green's function.
This module finds that root (complex Newton with an asymptotic seed),
verifies its uniqueness by an argument-principle count, and continues it
along a coupling ramp.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import greens
from .model import AlphaProfile, ModelParams, level_energy

__all__ = [
    "NoConvergenceError",
    "MultiplicityError",
    "Resonance",
    "ResonanceTrajectory",
    "barrier_eigenvalues",
    "resonance_seed",
    "find_resonance",
    "winding_count",
    "resonance_trajectory",
    "resonance_derivative",
]


class NoConvergenceError(ArithmeticError):
    """Raised when a Newton iteration fails to reach tolerance."""


class MultiplicityError(ArithmeticError):
    """Raised when the window contains a number of roots different from 1."""


@dataclass(frozen=True)
class Resonance:
    """A solved resonance: complex energy plus solver diagnostics."""

    E: complex
    alpha: float
    residual: float
    iterations: int

    @property
    def E_R(self) -> float:
        return self.E.real

    @property
    def Gamma(self) -> float:
        return -self.E.imag


@dataclass
class ResonanceTrajectory:
    """Resonances continued along a coupling ramp, with the ramp attached."""

    times: np.ndarray
    resonances: list[Resonance]
    alpha: AlphaProfile
    params: ModelParams
    max_jump: float = 0.0

    @property
    def E(self) -> np.ndarray:
        return np.array([r.E for r in self.resonances])

    @property
    def Gamma(self) -> np.ndarray:
        return np.array([r.Gamma for r in self.resonances])

    @property
    def E_R(self) -> np.ndarray:
        return np.array([r.E_R for r in self.resonances])

    def at(self, t: float) -> Resonance:
        """Resonance at the sample closest to t."""
        i = int(np.argmin(np.abs(self.times - t)))
        return self.resonances[i]


def _eig_residual(z: complex, params: ModelParams) -> complex:
    """D(z) = 1 - p(z)^2 exp(-2j*Lam*l/h); its zeros are the bare eigenvalues."""
    L = greens.Lam(z, params)
    _, p = greens.phase_factors(z, params)
    return 1.0 - p * p * cmath.exp(-2j * L * params.l / params.h)


def _eig_residual_dz(z: complex, params: ModelParams) -> complex:
    L = greens.Lam(z, params)
    _, p = greens.phase_factors(z, params)
    s = greens.branch_sqrt(z) * cmath.exp(-params.theta0)
    dL = 1.0 / (2.0 * L)
    ds = cmath.exp(-params.theta0) / (2.0 * greens.branch_sqrt(z))
    dp = 2.0 * (ds * L - dL * s) / (L - s) ** 2
    El = cmath.exp(-2j * L * params.l / params.h)
    dEl = El * (-2j * params.l / params.h) * dL
    return -(2.0 * p * dp * El + p * p * dEl)


def barrier_eigenvalues(params: ModelParams, n_max: int,
                        require_sheet: bool = False) -> np.ndarray:
    """Spectral points of the dilated bare barrier, indices 0..n_max.

    The n = 0 point sits exactly at the barrier top V0 (the two-exponential
    basis degenerates there); higher points are Newton-refined from the seed

        z_n = V0 + h^2 (n*pi/l)^2 - 4j h^3 (n*pi)^2 / l^3,

    solving D(z) = 0 (the roots are the poles of the diagonal Green value).
    A root is a genuine eigenvalue of the dilated operator only while
    Im(exp(theta0)*sqrt(z)) > 0; at moderate h the higher roots drift out of
    that sector, so the check is enforced only with ``require_sheet``.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    out = [complex(params.V0)]
    h, l = params.h, params.l
    for n in range(1, n_max + 1):
        z = params.V0 + (h * n * math.pi / l) ** 2 - 4j * h**3 * (n * math.pi) ** 2 / l**3
        ok = False
        for _ in range(80):
            f = _eig_residual(z, params)
            if abs(f) < 1e-13:
                ok = True
                break
            df = _eig_residual_dz(z, params)
            z = z - f / df
        if not ok and abs(_eig_residual(z, params)) > 1e-12:
            raise NoConvergenceError(f"no-convergence({n}): residual {abs(f):.2e}")
        if require_sheet and params.tau > 0.0 \
                and (cmath.exp(params.theta0) * greens.branch_sqrt(z)).imag <= 0.0:
            raise NoConvergenceError(f"no-convergence({n}): wrong sheet")
        out.append(z)
    return np.array(out, dtype=complex)


def p0_closed_form(alpha: float, V0: float) -> complex:
    """Reflection factor at the limit level E0 = V0 - alpha^2/4, theta0 = 0:

    p0 = ( i|alpha| sqrt(V0 - alpha^2/4) - (V0 - alpha^2/2) ) / V0.
    """
    return (1j * abs(alpha) * math.sqrt(V0 - alpha**2 / 4.0) - (V0 - alpha**2 / 2.0)) / V0


def resonance_seed(alpha: float, params: ModelParams) -> complex:
    """Asymptotic resonance location used to start the Newton iteration:

    E ~ V0 - alpha^2/4 - (alpha^2/2) * p0 * exp(-|alpha| d(c,{a,b}) / h).
    """
    E0 = params.V0 - alpha**2 / 4.0
    w = math.exp(-abs(alpha) * params.d_edge / params.h)
    return E0 - (alpha**2 / 2.0) * p0_closed_form(alpha, params.V0) * w


def find_resonance(alpha, params: ModelParams, guess: complex | None = None,
                   max_iter: int = 50, check_unique: bool = False) -> Resonance:
    """Complex-Newton root of F(E) = 1 + h*alpha*G^E(c,c).

    Starts from ``guess`` or from :func:`resonance_seed`; converges when
    |F| < 1e-12 * max(1, |F(start)|).  With ``check_unique`` the root count
    in the spectral window is verified by :func:`winding_count` and a count
    different from one raises "multiplicity".

    ``alpha`` may be complex (the root is analytic in the coupling, which the
    tests probe by complex-step differentiation).
    """
    h = params.h
    E = complex(guess) if guess is not None else resonance_seed(
        alpha.real if isinstance(alpha, complex) else alpha, params)
    f0 = 1.0 + h * alpha * greens.green_cc(E, params).value
    tol = 1e-12 * max(1.0, abs(f0))
    f = f0
    it = 0
    while abs(f) > tol:
        if it >= max_iter:
            raise NoConvergenceError(
                f"no-convergence: |F| = {abs(f):.3e} after {it} iterations "
                f"(started at |F| = {abs(f0):.3e})")
        df = h * alpha * greens.dgreen_cc_dE(E, params)
        E = E - f / df
        f = 1.0 + h * alpha * greens.green_cc(E, params).value
        it += 1
    res = Resonance(E=E, alpha=complex(alpha).real, residual=abs(f), iterations=it)
    if check_unique:
        n = winding_count(alpha, params, center=E)
        if n != 1:
            raise MultiplicityError(f"multiplicity!=1: contour count {n}")
    return res


def winding_count(alpha, params: ModelParams, center: complex | None = None,
                  N0: float = 3.0) -> int:
    """Argument-principle count of roots of F(E) = 1 + h*alpha*G^E in the
    spectral window.

    The window is the rectangle Re E in [lam0 - 2h/d0, lam0 + 2h/d0] around
    the level lam0 = V0 - alpha^2/4 (or around ``center`` if given), with
    Im E from 0 down to -max(4*|Im seed|, 2*lam0*h^N0) so that the root is
    enclosed at finite h as well as in the deep asymptotic regime.
    """
    a = complex(alpha).real
    lam0 = center.real if center is not None else params.V0 - a**2 / 4.0
    seed = resonance_seed(a, params)
    half = 2.0 * params.h / params.d0
    depth = max(4.0 * abs(seed.imag), 2.0 * lam0 * params.h**N0)
    if center is not None:
        depth = max(depth, 4.0 * abs(center.imag))
    # counterclockwise around the lower-half rectangle
    corners = [lam0 - half - 1j * depth, lam0 + half - 1j * depth,
               lam0 + half + 0j, lam0 - half + 0j]

    def F(E):
        return 1.0 + params.h * alpha * greens.green_cc(E, params).value

    total = 0.0
    for k in range(4):
        z0, z1 = corners[k], corners[(k + 1) % 4]
        stack = [(z0, z1, F(z0), F(z1))]
        while stack:
            za, zb, fa, fb = stack.pop()
            dphi = cmath.phase(fb / fa)
            if abs(dphi) > 0.5 and abs(zb - za) > 1e-13 * half:
                zm = (za + zb) / 2.0
                fm = F(zm)
                stack.append((za, zm, fa, fm))
                stack.append((zm, zb, fm, fb))
            else:
                total += dphi
    return round(total / (2.0 * math.pi))


def resonance_trajectory(alpha: AlphaProfile, params: ModelParams,
                         times) -> ResonanceTrajectory:
    """Warm-started continuation of the resonance along the coupling ramp.

    Each solve is seeded by the previous root; if Newton needs more than 8
    iterations the time step is bisected once before failing.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0.0):
        raise ValueError("times must be a sorted 1d array")
    out: list[Resonance] = []
    guess: complex | None = None
    prev_t: float | None = None
    for t in times:
        a_t = alpha.value(float(t))
        try:
            r = find_resonance(a_t, params, guess=guess, max_iter=8)
        except NoConvergenceError:
            if prev_t is None:
                r = find_resonance(a_t, params, guess=None, max_iter=50)
            else:
                mid = alpha.value((prev_t + float(t)) / 2.0)
                r_mid = find_resonance(mid, params, guess=guess, max_iter=50)
                r = find_resonance(a_t, params, guess=r_mid.E, max_iter=50)
        out.append(r)
        guess = r.E
        prev_t = float(t)
    traj = ResonanceTrajectory(times=times, resonances=out, alpha=alpha, params=params)
    if len(out) > 1:
        traj.max_jump = float(np.max(np.abs(np.diff(traj.E))))
    return traj


def resonance_derivative(t: float, trajectory: ResonanceTrajectory,
                         params: ModelParams) -> tuple[complex, float]:
    """Time derivative of the resonance at (the sample nearest to) t.

    Differentiating 1 + h*alpha_t*G^{E(t)}(c,c) = 0 gives

        dE/dt = -(alpha_dot/alpha) * G^{E}(c,c) / (dG/dE)|_{E(t)},

    returned together with the leading value alpha_dot*|alpha|/2 that the
    exact expression approaches up to exponentially small terms.
    """
    r = trajectory.at(t)
    a_t = trajectory.alpha.value(t)
    adot = trajectory.alpha.dot(t)
    dG = greens.dgreen_cc_dE(r.E, params)
    if abs(dG) < 1e-12:
        raise ArithmeticError("derivative-degenerate: dG/dE ~ 0 at the resonance")
    G = greens.green_cc(r.E, params).value
    Edot = -(adot / a_t) * G / dG
    return complex(Edot), adot * abs(a_t) / 2.0
