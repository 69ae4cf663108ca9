"""Branch functions and closed-form Green's functions of the bare barrier.

Everything here concerns the dilated barrier Hamiltonian without the well:
flat potential ``V0`` on ``(a, b)``, exterior kinetic factor ``exp(-2*theta0)``
and interface matching at ``a`` and ``b``.  Its Green's function with source
at the well position ``c`` is available in closed form, and all spectral
quantities of the driven model reduce to evaluations of it.

Conventions, used consistently across the package:

* ``branch_sqrt`` is the square root with the cut along the positive
  imaginary axis (``arg z`` read in ``(-3*pi/2, pi/2)``).  With this choice
  the barrier momentum ``Lam(z) = branch_sqrt(z - V0)`` has negative
  imaginary part whenever ``Re z`` lies in ``(0, V0)``, so every interior
  exponential ``exp(-1j*Lam*d/h)`` with ``d >= 0`` decays.
* ``p(z) = (Lam + s)/(Lam - s)``, ``s = branch_sqrt(z)*exp(-theta0)``, is the
  interface reflection factor; the phase ``gamma`` satisfies
  ``exp(-2j*gamma) = p``.
* Interior formulas are evaluated as products of decaying exponentials,
  never as cos/tan of large complex arguments, so they stay finite for
  arbitrarily small ``h``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams

__all__ = [
    "BranchCutError",
    "PoleProximityError",
    "DegenerateDenominatorError",
    "NotAResonanceError",
    "GreenDiagonal",
    "branch_sqrt",
    "Lam",
    "phase_factors",
    "green_cc",
    "green_xc",
    "green_dx",
    "dgreen_cc_dE",
    "dLamG_dE",
    "pole_factor",
    "green_norm_sq",
]

_HALF_PI = 0.5 * math.pi


class BranchCutError(ValueError):
    """Raised for arguments on the branch cut (positive imaginary axis)."""


class PoleProximityError(ArithmeticError):
    """Raised when a Green's function is evaluated too close to a pole."""


class DegenerateDenominatorError(ArithmeticError):
    """Raised when the interface factor p(z) degenerates."""


class NotAResonanceError(ValueError):
    """Raised when a claimed resonance fails the defining identity."""


def branch_sqrt(z):
    """Square root with cut along the positive imaginary axis.

    Returns w with ``w**2 = z`` and ``arg w`` in ``(-3*pi/4, pi/4]``; accepts
    scalars or arrays.  Signals "on-cut" for z strictly on the positive
    imaginary axis.
    """
    zc = np.asarray(z, dtype=complex)
    if np.any((zc.real == 0.0) & (zc.imag > 0.0)):
        raise BranchCutError("on-cut: z on the positive imaginary axis")
    w = np.sqrt(zc)
    # principal sqrt cuts along the negative reals; rotate the sector
    # arg z in (pi/2, pi] down to (-3*pi/2, -pi] by flipping the sign.
    w = np.where(np.angle(zc) > _HALF_PI, -w, w)
    if np.ndim(z) == 0:
        return complex(w)
    return w


def Lam(z, params: ModelParams):
    """Barrier momentum ``Lam(z) = branch_sqrt(z - V0)``.

    ``Im Lam < 0`` whenever ``Re z`` is in ``(0, V0)``.
    """
    return branch_sqrt(np.asarray(z, dtype=complex) - params.V0)


def phase_factors(z, params: ModelParams):
    """Interface phase gamma and reflection factor p = exp(-2j*gamma).

    ``exp(2j*gamma) = (Lam - s)/(Lam + s)`` with
    ``s = branch_sqrt(z)*exp(-theta0)``; p is returned as the exact
    reciprocal, so ``p * exp(2j*gamma) == 1`` to roundoff.
    """
    L = Lam(z, params)
    s = branch_sqrt(z) * cmath.exp(-params.theta0)
    den = L + s
    if np.min(np.abs(den)) < 1e-14 * max(1.0, math.sqrt(params.V0)):
        raise DegenerateDenominatorError(
            "degenerate-denominator: Lam + sqrt(z)*exp(-theta0) ~ 0")
    ratio = (L - s) / den  # exp(2j*gamma)
    gamma = np.log(np.asarray(ratio, dtype=complex)) / 2j
    p = 1.0 / ratio
    if np.ndim(z) == 0:
        return complex(gamma), complex(p)
    return gamma, p


def _core(z, params: ModelParams):
    """Shared factors (Lam, p, Ea, Eb, El, D) of the closed forms, with
    Ea = exp(-2j*Lam*(c-a)/h), Eb = exp(-2j*Lam*(b-c)/h), El = Ea*Eb and the
    pole denominator D = 1 - p**2 * El."""
    L = Lam(z, params)
    _, p = phase_factors(z, params)
    h = params.h
    Ea = np.exp(-2j * L * (params.c - params.a) / h)
    Eb = np.exp(-2j * L * (params.b - params.c) / h)
    El = Ea * Eb
    D = 1.0 - p * p * El
    return L, p, Ea, Eb, El, D


def _check_pole(D, L, params: ModelParams):
    if np.min(np.abs(D)) < 1e-14 / params.h:
        raise PoleProximityError("pole-proximity: resolvent denominator ~ 0")
    if np.min(np.abs(L)) < 1e-13:
        raise PoleProximityError("pole-proximity: z at the barrier top V0")


@dataclass(frozen=True)
class GreenDiagonal:
    """Diagonal value G(c,c) with its exponential factors retained."""

    z: complex
    value: complex
    exp_ca: complex  # exp(-2j*Lam*(c-a)/h)
    exp_bc: complex  # exp(-2j*Lam*(b-c)/h)
    exp_l: complex   # exp(-2j*Lam*(b-a)/h)
    p: complex
    Lam: complex
    h: float

    def rebuild(self) -> complex:
        """Recompute the value from the retained factors (diagnostic)."""
        num = 1.0 + self.p * (self.exp_ca + self.exp_bc) + self.p**2 * self.exp_l
        den = 1.0 - self.p**2 * self.exp_l
        return -1j / (2.0 * self.h * self.Lam) * num / den


def green_cc(z, params: ModelParams) -> GreenDiagonal:
    """Diagonal Green value of the dilated bare barrier at the well point:

    G(c,c) = -i/(2*h*Lam) * [1 + p*(Ea + Eb) + p^2*El] / [1 - p^2*El].
    """
    L, p, Ea, Eb, El, D = _core(z, params)
    _check_pole(D, L, params)
    val = -1j / (2.0 * params.h * L) * (1.0 + p * (Ea + Eb) + p * p * El) / D
    return GreenDiagonal(z=complex(z), value=complex(val), exp_ca=complex(Ea),
                         exp_bc=complex(Eb), exp_l=complex(El), p=complex(p),
                         Lam=complex(L), h=params.h)


def _interior_boundary_values(z, params: ModelParams):
    """Interior limits (G(a+, c), G(b-, c)) in stable exponential form."""
    L, p, Ea, Eb, El, D = _core(z, params)
    _check_pole(D, L, params)
    h, l = params.h, params.l
    pre = -1j / (2.0 * h * L * D)
    g_a = pre * (1.0 + p) * (np.exp(-1j * L * (params.c - params.a) / h)
                             + p * np.exp(-1j * L * (l + params.b - params.c) / h))
    g_b = pre * (1.0 + p) * (np.exp(-1j * L * (params.b - params.c) / h)
                             + p * np.exp(-1j * L * (l + params.c - params.a) / h))
    return g_a, g_b


def green_xc(z, x, params: ModelParams):
    """Green's function G(x, c) of the dilated bare barrier, any real x.

    Interior (a <= x <= b), with every exponent decaying:

        G(x,c) = -i/(2 h Lam D) * [ e^{-i Lam |x-c|/h}
                                    + p e^{-i Lam ((x-a)+(c-a))/h}
                                    + p e^{-i Lam ((b-x)+(b-c))/h}
                                    + p^2 e^{-i Lam (2l-|x-c|)/h} ].

    This reduces to the diagonal formula at x = c and is symmetric under
    swapping x and c.  Outside the barrier the tails are the matched dilated
    exponentials  e^{theta0} G(boundary) * exp(+-1j*sqrt(z)e^{theta0}(x-b|a)/h).

    ``x`` may be an array; ``z`` is scalar.
    """
    L, p, Ea, Eb, El, D = _core(z, params)
    _check_pole(D, L, params)
    a, b, c, h, l = params.a, params.b, params.c, params.h, params.l
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    xi = np.clip(x, a, b)

    pre = -1j / (2.0 * h * L * D)
    dxc = np.abs(xi - c)
    vals = pre * (np.exp(-1j * L * dxc / h)
                  + p * np.exp(-1j * L * ((xi - a) + (c - a)) / h)
                  + p * np.exp(-1j * L * ((b - xi) + (b - c)) / h)
                  + p * p * np.exp(-1j * L * (2.0 * l - dxc) / h))

    left = x < a
    right = x > b
    if left.any() or right.any():
        g_a, g_b = _interior_boundary_values(z, params)
        sq = branch_sqrt(z) * cmath.exp(params.theta0)
        amp = cmath.exp(params.theta0)
        vals = np.where(left, amp * g_a * np.exp(-1j * sq * (x - a) / h), vals)
        vals = np.where(right, amp * g_b * np.exp(1j * sq * (x - b) / h), vals)
    return complex(vals[0]) if scalar else vals


def green_dx(z, x, params: ModelParams, side: int = 0):
    """Analytic x-derivative of G(x, c).

    ``side`` resolves the kink at the well point: +1 evaluates the x > c
    branch, -1 the x < c branch; with side = 0 an evaluation exactly at c is
    rejected.  The defining jump is  h^2*(G'(c+) - G'(c-)) = -1,  and at the
    barrier edges the interior limits satisfy the outgoing relations
    (h d/dx + 1j*sqrt(z)e^{-theta0}) G(a+) = 0  and
    (h d/dx - 1j*sqrt(z)e^{-theta0}) G(b-) = 0.
    """
    L, p, Ea, Eb, El, D = _core(z, params)
    _check_pole(D, L, params)
    a, b, c, h, l = params.a, params.b, params.c, params.h, params.l
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if side == 0 and np.any(x == c):
        raise ValueError("derivative at x = c requires side=+1 or side=-1")
    xi = np.clip(x, a, b)
    above = xi > c if side == 0 else np.full(x.shape, side > 0)

    pre = -1j / (2.0 * h * L * D)
    k = -1j * L / h
    dxc = np.abs(xi - c)
    sgn = np.where(above, 1.0, -1.0)
    # term exponents: |x-c|, (x-a)+(c-a), (b-x)+(b-c), 2l-|x-c|
    d1 = sgn * k * np.exp(-1j * L * dxc / h)
    d2 = k * p * np.exp(-1j * L * ((xi - a) + (c - a)) / h)
    d3 = -k * p * np.exp(-1j * L * ((b - xi) + (b - c)) / h)
    d4 = -sgn * k * p * p * np.exp(-1j * L * (2.0 * l - dxc) / h)
    vals = pre * (d1 + d2 + d3 + d4)

    left = x < a
    right = x > b
    if left.any() or right.any():
        g_a, g_b = _interior_boundary_values(z, params)
        sq = branch_sqrt(z) * cmath.exp(params.theta0)
        amp = cmath.exp(params.theta0)
        vals = np.where(left, amp * g_a * (-1j * sq / h) * np.exp(-1j * sq * (x - a) / h), vals)
        vals = np.where(right, amp * g_b * (1j * sq / h) * np.exp(1j * sq * (x - b) / h), vals)
    return complex(vals[0]) if scalar else vals


def _core_dE(z, params: ModelParams):
    """Energy derivatives of the shared factors at scalar z."""
    L, p, Ea, Eb, El, D = _core(z, params)
    h = params.h
    s = branch_sqrt(z) * cmath.exp(-params.theta0)
    dL = 1.0 / (2.0 * L)
    ds = cmath.exp(-params.theta0) / (2.0 * branch_sqrt(z))
    dp = 2.0 * (ds * L - dL * s) / (L - s) ** 2
    dEa = Ea * (-2j * (params.c - params.a) / h) * dL
    dEb = Eb * (-2j * (params.b - params.c) / h) * dL
    dEl = El * (-2j * params.l / h) * dL
    N = 1.0 + p * (Ea + Eb) + p * p * El
    dN = dp * (Ea + Eb) + p * (dEa + dEb) + 2.0 * p * dp * El + p * p * dEl
    dD = -(2.0 * p * dp * El + p * p * dEl)
    return L, dL, N, dN, D, dD


def dgreen_cc_dE(z, params: ModelParams) -> complex:
    """Analytic energy derivative of G(c,c) (used by the Newton solver)."""
    L, dL, N, dN, D, dD = _core_dE(z, params)
    _check_pole(D, L, params)
    pre = -1j / (2.0 * params.h)
    return complex(pre * ((dN / D - N * dD / D**2) / L - dL * N / (D * L**2)))


def dLamG_dE(z, params: ModelParams) -> complex:
    """Analytic energy derivative of Lam(z)*G(c,c) (regular at z = V0)."""
    L, dL, N, dN, D, dD = _core_dE(z, params)
    pre = -1j / (2.0 * params.h)
    return complex(pre * (dN / D - N * dD / D**2))


def pole_factor(E, E_res, alpha: float, params: ModelParams,
                deriv_tol: float = 1e-6, check_tol: float = 1e-6) -> complex:
    """Residue-normalisation factor M with (1 + h*alpha*G^E(c,c))^(-1) = M/(E - E_res).

    M = [E - V0 + Lam(E_res)*Lam(E)] /
        [1 + h*alpha*(Lam(E) + Lam(E_res)) * Q],

    where Q is the incremental ratio of Lam*G(c,c) between E and E_res.  For
    |E - E_res| < deriv_tol*h the ratio is catastrophically cancelled and is
    replaced by the analytic derivative of Lam*G at the midpoint.

    Raises "not-a-resonance" when the defining identity fails beyond
    check_tol (only checkable away from the derivative branch).
    """
    E = complex(E)
    E_res = complex(E_res)
    LE = Lam(E, params)
    Lr = Lam(E_res, params)
    gap = E - E_res
    if abs(gap) < deriv_tol * params.h:
        Q = dLamG_dE((E + E_res) / 2.0, params)
    else:
        Q = (LE * green_cc(E, params).value - Lr * green_cc(E_res, params).value) / gap
    M = (E - params.V0 + Lr * LE) / (1.0 + params.h * alpha * (LE + Lr) * Q)
    if abs(gap) >= deriv_tol * params.h:
        resid = abs((1.0 + params.h * alpha * green_cc(E, params).value) * M / gap - 1.0)
        if resid > check_tol:
            raise NotAResonanceError(
                f"not-a-resonance: identity residual {resid:.3e} at E={E:.6g}")
    return complex(M)


def green_norm_sq(z, params: ModelParams, pts_per_h: int = 60) -> float:
    """Squared L2 norm of G(., c) over the whole line.

    Interior part by composite Simpson (resolution ``pts_per_h`` nodes per
    length h), exterior tails integrated in closed form.  Requires the tails
    to decay, i.e. Im(sqrt(z)*exp(theta0)) > 0.
    """
    a, b, h = params.a, params.b, params.h
    n = int(max(512, pts_per_h * (b - a) / h))
    if n % 2 == 1:
        n += 1
    x = np.linspace(a, b, n + 1)
    vals = np.abs(green_xc(z, x, params)) ** 2
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    interior = float(np.sum(w * vals)) * (x[1] - x[0]) / 3.0

    kappa = branch_sqrt(z) * cmath.exp(params.theta0)
    if kappa.imag <= 0.0:
        raise PoleProximityError(
            "pole-proximity: exterior tails do not decay (Im(sqrt(z)e^theta0) <= 0)")
    g_a, g_b = _interior_boundary_values(z, params)
    amp2 = abs(cmath.exp(params.theta0)) ** 2
    tail = h / (2.0 * kappa.imag)
    exterior = amp2 * (abs(g_a) ** 2 + abs(g_b) ** 2) * tail
    return interior + exterior
