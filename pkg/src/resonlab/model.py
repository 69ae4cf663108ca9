"""Physical parameters and input profiles of the driven-well barrier model.

The model is a flat barrier of height ``V0`` on ``(a, b)`` with an attractive
delta well of slowly varying strength ``h * alpha(t)`` at an interior point
``c``, evolved on the exponentially long time scale ``1/eps``.  This module
owns the static geometry, the three input functions (coupling ramp
``alpha(t)``, energy window ``g(k)``, charge observable ``chi(x)``) and the
standing assumptions h1..h4 that every scenario must satisfy:

h1  the dilation angle is positive:  theta0 = i*tau, tau > 0;
h2  alpha(t) stays in (-2*sqrt(V0), 0) and its total variation is at most
    2*h/(sqrt(V0)*d0);
h3  g is smooth, supported on {k > 0, |k^2 - lambda0| < 2*h/d0} inside
    (0, V0), and chi is a smooth bump with plateau half-width eta smaller
    than the distance from c to the barrier edges;
h4  the slow time scale is eps = exp(-|alpha(0)| * d(c,{a,b}) / h).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "AlphaProfile",
    "PartitionFn",
    "ChiObservable",
    "ValidationReport",
    "validate",
    "adiabatic_epsilon",
    "level_energy",
]


@dataclass(frozen=True)
class ModelParams:
    """Static geometry and scales.  Immutable after construction."""

    a: float
    b: float
    c: float
    V0: float
    h: float
    theta0: complex
    eta: float
    d0: float
    T: float

    @property
    def l(self) -> float:
        return self.b - self.a

    @property
    def d_edge(self) -> float:
        """Distance from the well to the nearest barrier edge."""
        return min(self.c - self.a, self.b - self.c)

    @property
    def case(self) -> str:
        """"left" when c-a < b-c (well near the left edge), else "right"."""
        return "left" if (self.c - self.a) < (self.b - self.c) else "right"

    @property
    def tau(self) -> float:
        return float(self.theta0.imag)


def _smoothstep(u):
    """Quintic smoothstep: 0 below 0, 1 above 1, C^2 in between."""
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def _smoothstep_du(u):
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    uu = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * uu**2 * (1.0 - uu) ** 2, 0.0)


# Peak of x*exp(-x**2/2), used to normalise the pulse ramp to unit range.
_PULSE_PEAK = math.exp(-0.5)


@dataclass(frozen=True)
class AlphaProfile:
    """Closed-form coupling ramp alpha(t) = alpha0 + amplitude * s(t/T).

    Ramp kinds
    ----------
    "constant"    s = 0; frozen coupling.
    "smoothstep"  s rises 0 -> 1 with vanishing end slopes (default drive).
    "pulse"       s = x*exp(-x^2/2)/max, x = (u - u_star)/width: a localised
                  swing that crosses s = 0 transversally at t = u_star*T.
                  Used for scenarios where alpha returns to alpha0 mid-run.

    The total variation of every kind is |amplitude| * (max s - min s), which
    the constructor reports via :meth:`variation` for the h2 check.
    """

    alpha0: float
    amplitude: float
    T: float
    kind: str = "smoothstep"
    u_star: float = 0.35
    width: float = 0.04

    def _shape(self, u):
        if self.kind == "constant":
            return np.zeros_like(np.asarray(u, dtype=float))
        if self.kind == "smoothstep":
            return _smoothstep(u)
        if self.kind == "pulse":
            x = (np.asarray(u, dtype=float) - self.u_star) / self.width
            return x * np.exp(-0.5 * x**2) / _PULSE_PEAK
        raise ValueError(f"unknown ramp kind {self.kind!r}")

    def _shape_du(self, u):
        if self.kind == "constant":
            return np.zeros_like(np.asarray(u, dtype=float))
        if self.kind == "smoothstep":
            return _smoothstep_du(u)
        if self.kind == "pulse":
            x = (np.asarray(u, dtype=float) - self.u_star) / self.width
            return (1.0 - x**2) * np.exp(-0.5 * x**2) / (_PULSE_PEAK * self.width)
        raise ValueError(f"unknown ramp kind {self.kind!r}")

    def value(self, t):
        """alpha(t); accepts scalars or arrays."""
        out = self.alpha0 + self.amplitude * self._shape(np.asarray(t) / self.T)
        return float(out) if np.isscalar(t) else out

    def dot(self, t):
        """d alpha / dt."""
        out = self.amplitude * self._shape_du(np.asarray(t) / self.T) / self.T
        return float(out) if np.isscalar(t) else out

    def bounds(self, n: int = 4097) -> tuple[float, float]:
        """(min, max) of alpha over [0, T], from a dense deterministic scan."""
        vals = self.value(np.linspace(0.0, self.T, n))
        return float(vals.min()), float(vals.max())

    def variation(self, n: int = 4097) -> float:
        lo, hi = self.bounds(n)
        return hi - lo


def _exp_bump_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(s > 0.0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        g = np.where(s < 1.0, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    return f / (f + g)


@dataclass(frozen=True)
class PartitionFn:
    """Energy window g(k) >= 0 centred at lambda0 with half-width 2*h/d0.

    g(k) = exp(-y^2) * cutoff(|y|),  y = (k^2 - lambda0) * d0 / h,

    where the cutoff is a C-infinity plateau equal to 1 on |y| <= 1 and 0 on
    |y| >= 2, so the analytic Gaussian core carries the whole inner
    half-window and g(sqrt(E)) extends holomorphically there.
    """

    lambda0: float
    h: float
    d0: float

    @property
    def halfwidth(self) -> float:
        """Support half-width in the energy variable k^2."""
        return 2.0 * self.h / self.d0

    @property
    def k_range(self) -> tuple[float, float]:
        lo = self.lambda0 - self.halfwidth
        hi = self.lambda0 + self.halfwidth
        return math.sqrt(max(lo, 0.0)), math.sqrt(hi)

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        y = (k**2 - self.lambda0) * self.d0 / self.h
        core = np.exp(-np.minimum(y**2, 700.0))
        cut = 1.0 - _exp_bump_step(np.abs(y) - 1.0)
        out = np.where(k > 0.0, core * cut, 0.0)
        return float(out) if out.ndim == 0 else out

    def of_energy(self, E):
        """g evaluated at k = sqrt(E); accepts complex E near lambda0
        (analytic core only, valid on the inner half-window)."""
        y = (np.asarray(E) - self.lambda0) * self.d0 / self.h
        return np.exp(-(y**2))


@dataclass(frozen=True)
class ChiObservable:
    """Charge observable: smooth bump, 1 on [c-eta, c+eta], 0 outside
    (c-2*eta, c+2*eta)."""

    c: float
    eta: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        left = _smoothstep((x - (self.c - 2.0 * self.eta)) / self.eta)
        right = _smoothstep(((self.c + 2.0 * self.eta) - x) / self.eta)
        out = left * right
        return float(out) if out.ndim == 0 else out

    @property
    def support(self) -> tuple[float, float]:
        return self.c - 2.0 * self.eta, self.c + 2.0 * self.eta


@dataclass
class ValidationReport:
    passed: bool
    violations: list[tuple[str, str, float]] = field(default_factory=list)

    def ids(self) -> list[str]:
        return [v[0] for v in self.violations]

    def __str__(self) -> str:
        if self.passed:
            return "validate: pass"
        lines = [f"validate: {len(self.violations)} violation(s)"]
        lines += [f"  {vid}: {msg} (margin {m:.3g})" for vid, msg, m in self.violations]
        return "\n".join(lines)


def validate(
    params: ModelParams,
    alpha: AlphaProfile,
    g: PartitionFn | None = None,
    resonant_window: bool = False,
    box_L: float | None = None,
    direct_scheme: bool = False,
) -> ValidationReport:
    """Check the standing assumptions; returns a report, never raises.

    Each violation is reported as (identifier, message, margin) where the
    margin is positive by the amount the constraint is broken.  With
    ``direct_scheme`` and ``box_L`` the dilated incident tail, which grows
    like exp(k sin(tau) |x-a| / h) to the left, must gain less than a factor
    10 over the box (the scattered propagation scheme never puts that tail
    on the grid, so the check only applies to direct runs).
    """
    bad: list[tuple[str, str, float]] = []

    if direct_scheme and box_L is not None and g is not None:
        k_max = g.k_range[1]
        growth = math.exp(k_max * math.sin(params.tau) * box_L / params.h)
        if growth >= 10.0:
            bad.append(("box-growth",
                        f"dilated incident tail grows x{growth:.1f} over the box "
                        "(>= 10); reduce tau or L, or use the scattered scheme",
                        growth - 10.0))

    if not (params.a < params.c < params.b):
        bad.append(("geometry", "c must lie inside (a, b)", 0.0))
    if params.V0 <= 0.0:
        bad.append(("geometry", "V0 must be positive", -params.V0))
    if params.h <= 0.0:
        bad.append(("geometry", "h must be positive", -params.h))

    # Equal edge distances are rejected: the two cases of the reduced model
    # split strictly on which barrier is thinner.
    gap = abs((params.c - params.a) - (params.b - params.c))
    if gap < 1e-9 * params.l:
        bad.append(("critical-case", "c-a and b-c must differ", gap))

    if abs(params.theta0.real) > 1e-14 or params.theta0.imag < 0.0:
        bad.append(("h1", "theta0 must be i*tau with tau >= 0", abs(params.theta0.real)))

    lo, hi = alpha.bounds()
    amax = -2.0 * math.sqrt(params.V0)
    if not (amax < lo and hi < 0.0):
        bad.append(("h2", f"alpha range [{lo:.4g}, {hi:.4g}] not inside ({amax:.4g}, 0)",
                    max(amax - lo, hi, 0.0)))
    var_cap = 2.0 * params.h / (math.sqrt(params.V0) * params.d0)
    var = alpha.variation()
    if var > var_cap * (1.0 + 1e-12):
        bad.append(("h2", f"alpha variation {var:.4g} exceeds {var_cap:.4g}", var - var_cap))

    if not (params.eta < params.d_edge):
        bad.append(("h3", f"eta >= d(c,{{a,b}}) = {params.d_edge:.4g}", params.eta - params.d_edge))
    if not (2.0 * params.eta <= params.d_edge):
        # chi must be supported inside (a, b)
        bad.append(("h3", "chi support (c-2*eta, c+2*eta) leaves (a, b)",
                    2.0 * params.eta - params.d_edge))

    if g is not None:
        if g.lambda0 - g.halfwidth <= 0.0 or g.lambda0 + g.halfwidth >= params.V0:
            bad.append(("h3", "g window leaves (0, V0)",
                        max(-(g.lambda0 - g.halfwidth), g.lambda0 + g.halfwidth - params.V0)))
        if resonant_window:
            t = np.linspace(0.0, params.T, 512)
            lam = level_energy(params, alpha, t)
            off = float(np.max(np.abs(lam - g.lambda0))) - g.halfwidth
            if off > 0.0:
                bad.append(("h3", "sqrt(lambda_t) leaves supp g during the run", off))

    return ValidationReport(passed=not bad, violations=bad)


def adiabatic_epsilon(params: ModelParams, alpha: AlphaProfile) -> float:
    """Slow-time parameter eps = exp(-|alpha(0)| * d(c,{a,b}) / h)."""
    return math.exp(-abs(alpha.value(0.0)) * params.d_edge / params.h)


def level_energy(params: ModelParams, alpha: AlphaProfile | float, t=None):
    """Instantaneous well level lambda_t = V0 - alpha(t)^2 / 4.

    ``alpha`` may be a profile (then ``t`` is required) or a bare coupling
    value.
    """
    if isinstance(alpha, AlphaProfile):
        if t is None:
            raise TypeError("t is required when alpha is a profile")
        a = alpha.value(t)
    else:
        a = alpha
    out = params.V0 - np.asarray(a, dtype=float) ** 2 / 4.0
    return float(out) if out.ndim == 0 else out
