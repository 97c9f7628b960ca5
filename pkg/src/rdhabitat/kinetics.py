"""Reaction kinetics of the prey-predator model with additive Allee effect.

The temporal model is

    du/dt = u*(r - f*u - m/(b+u)) - c*u*v/(u+a)  =  u*g(u) - h(u)*v
    dv/dt = s*v*(c*u/(u+a) - q - p*v)            =  s*(h(u) - q - p*v)*v

with per-capita prey growth g, saturating functional response h and
density-dependent predator mortality q + p*v.  This module locates
coexistence equilibria, classifies the Allee regime, linearizes the system,
and evaluates the oscillatory-instability (Hopf) threshold together with the
first Lyapunov number that decides whether the emerging limit cycle is
stable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .errors import EmptyResult, Infeasible, NoSignChange, NumericalFailure

# Root-refinement tolerances for the coexistence polynomial.
_POLY_RESIDUAL_TOL = 1e-10
_BISECT_WIDTH_TOL = 1e-12
_ROOT_MERGE_TOL = 1e-8


@dataclass(frozen=True)
class KineticParams:
    """The nine positive reaction constants.

    r: intrinsic prey growth rate; f: intra-specific prey competition;
    m: Allee severity; b: Allee strength; c: capture rate; q: predator
    natural death rate; p: predator density-dependent death rate;
    s: feed-concentration multiplier; a: half-saturation prey density.
    """

    r: float
    f: float
    m: float
    b: float
    c: float
    q: float
    p: float
    s: float
    a: float

    def __post_init__(self):
        for name in ("r", "f", "m", "b", "c", "q", "p", "s", "a"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"kinetic parameter {name!r} must be strictly positive, got {value}")

    def with_(self, **kwargs) -> "KineticParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class Equilibrium:
    """Coexistence state (u*, v*); both components strictly positive."""

    u_star: float
    v_star: float


@dataclass(frozen=True)
class JacobianEntries:
    """Entries of the 2x2 linearization at a coexistence equilibrium."""

    a11: float
    a12: float
    a21: float
    a22: float

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21


class AlleeRegime(enum.Enum):
    STRONG = "strong"
    WEAK = "weak"
    NONE = "none"


@dataclass(frozen=True)
class TaylorCoefficients:
    """True Taylor coefficients of both reaction terms about an equilibrium.

    beta_ij (prey equation) and gamma_ij (predator equation) multiply
    u1^i * v1^j in the expansion; each equals
    (1/(i! j!)) * d^{i+j}F/du^i dv^j evaluated at the equilibrium.
    """

    beta10: float
    beta01: float
    beta20: float
    beta11: float
    beta02: float
    beta30: float
    beta21: float
    beta12: float
    beta03: float
    gamma10: float
    gamma01: float
    gamma20: float
    gamma11: float
    gamma02: float
    gamma30: float
    gamma21: float
    gamma12: float
    gamma03: float


def growth_g(u, p: KineticParams):
    """Per-capita prey growth rate r - f*u - m/(b+u); accepts arrays."""
    return p.r - p.f * u - p.m / (p.b + u)


def functional_h(u, p: KineticParams):
    """Saturating functional response c*u/(u+a); bounded above by c."""
    return p.c * u / (u + p.a)


def mortality_m(v, p: KineticParams):
    """Per-capita predator death rate q + p*v."""
    return p.q + p.p * v


def reaction_rates(u, v, p: KineticParams):
    """Right-hand sides (du/dt, dv/dt) of the temporal model; accepts arrays."""
    du = u * (p.r - p.f * u - p.m / (p.b + u) - p.c * v / (u + p.a))
    dv = p.s * v * (p.c * u / (u + p.a) - p.q - p.p * v)
    return du, dv


def allee_regime(p: KineticParams) -> AlleeRegime:
    """Classify the Allee effect as strong, weak, or absent.

    Weak:   b^2*r*f < m < b*r
    Strong: b^2*r*f < b*r < m < (r^2*(1-b*f)^2 + 4*b*r^2*f) / (4*r*f)
    Boundaries are excluded (strict inequalities), so the regimes are
    mutually exclusive.
    """
    low = p.b ** 2 * p.r * p.f
    mid = p.b * p.r
    high = (p.r ** 2 * (1.0 - p.b * p.f) ** 2 + 4.0 * p.b * p.r ** 2 * p.f) / (4.0 * p.r * p.f)
    if low < p.m < mid:
        return AlleeRegime.WEAK
    if low < mid < p.m < high:
        return AlleeRegime.STRONG
    return AlleeRegime.NONE


def quartic_coefficients(p: KineticParams) -> np.ndarray:
    """Coefficients [A0..A4] (descending powers) of the coexistence polynomial.

    Eliminating v between the two non-trivial nullclines
    v = u*g(u)/h(u) and v = (h(u) - q)/p and clearing denominators gives a
    degree-4 polynomial in u whose positive roots are the coexistence prey
    densities.  The s parameter does not appear: both nullclines are s-free.
    """
    r, f, m, b, c, q, pp, a = p.r, p.f, p.m, p.b, p.c, p.q, p.p, p.a
    A0 = pp * f
    A1 = pp * ((2.0 * a + b) * f - r)
    A2 = pp * f * a * (a + 2.0 * b) + m * pp + c * (c - q) - (2.0 * a + b) * r * pp
    A3 = pp * f * a ** 2 * b + 2.0 * a * m * pp + b * c * (c - q) - a * (a + 2.0 * b) * r * pp - a * c * q
    A4 = a ** 2 * pp * (m - b * r) - a * b * c * q
    return np.array([A0, A1, A2, A3, A4])


def _predator_nullcline_v(u: float, p: KineticParams) -> float:
    return (functional_h(u, p) - p.q) / p.p


def _refine_root(coeffs: np.ndarray, lo: float, hi: float) -> float:
    """Polish a sign-change bracket with Newton steps, bisection fallback."""
    deriv = np.polyder(coeffs)
    flo = np.polyval(coeffs, lo)
    u = 0.5 * (lo + hi)
    for _ in range(100):
        fu = np.polyval(coeffs, u)
        if abs(fu) <= _POLY_RESIDUAL_TOL and hi - lo <= 1e-9:
            return u
        # Keep the bracket valid for the bisection fallback.
        if fu == 0.0:
            return u
        if (fu > 0) == (flo > 0):
            lo = u
        else:
            hi = u
        dfu = np.polyval(deriv, u)
        if dfu != 0.0:
            step = fu / dfu
            candidate = u - step
            if lo < candidate < hi:
                u = candidate
                continue
        u = 0.5 * (lo + hi)
        if hi - lo < _BISECT_WIDTH_TOL:
            return u
    if abs(np.polyval(coeffs, u)) > _POLY_RESIDUAL_TOL:
        raise NumericalFailure(f"root refinement did not converge on [{lo}, {hi}]")
    return u


def coexistence_equilibria(p: KineticParams, scan_samples: int = 4096) -> list[Equilibrium]:
    """All feasible coexistence equilibria, sorted by ascending prey density.

    Prey roots are located by a dense sign-change scan of the coexistence
    polynomial on (0, r/f] (prey growth is negative beyond r/f) followed by
    Newton polishing.  A root is kept when the implied predator density
    v* = (h(u*) - q)/p is strictly positive, which requires c > q and
    u* > a*q/(c - q).  Roots closer than 1e-8 are merged.
    """
    coeffs = quartic_coefficients(p)
    u_hi = p.r / p.f
    us = np.linspace(u_hi / scan_samples * 1e-6, u_hi, scan_samples)
    vals = np.polyval(coeffs, us)

    roots: list[float] = []
    for i in range(len(us) - 1):
        if vals[i] == 0.0:
            roots.append(float(us[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(_refine_root(coeffs, float(us[i]), float(us[i + 1])))
    if vals[-1] == 0.0:
        roots.append(float(us[-1]))

    merged: list[float] = []
    for u in sorted(roots):
        if not merged or u - merged[-1] > _ROOT_MERGE_TOL:
            merged.append(u)

    equilibria = []
    for u in merged:
        if not 0.0 < u <= u_hi:
            continue
        v = _predator_nullcline_v(u, p)
        if v > 0.0:
            equilibria.append(Equilibrium(u_star=u, v_star=v))
    if not equilibria:
        raise EmptyResult("no feasible coexistence equilibrium for these parameters")
    return equilibria


def unique_equilibrium(p: KineticParams) -> Equilibrium:
    """The single coexistence equilibrium; raises if there are several."""
    eqs = coexistence_equilibria(p)
    if len(eqs) != 1:
        raise EmptyResult(f"expected a unique coexistence equilibrium, found {len(eqs)}")
    return eqs[0]


def _g_derivatives(u: float, p: KineticParams) -> tuple[float, float, float, float]:
    d = p.b + u
    return (
        p.r - p.f * u - p.m / d,
        -p.f + p.m / d ** 2,
        -2.0 * p.m / d ** 3,
        6.0 * p.m / d ** 4,
    )


def _h_derivatives(u: float, p: KineticParams) -> tuple[float, float, float, float]:
    d = u + p.a
    return (
        p.c * u / d,
        p.c * p.a / d ** 2,
        -2.0 * p.c * p.a / d ** 3,
        6.0 * p.c * p.a / d ** 4,
    )


def jacobian_at(eq: Equilibrium, p: KineticParams) -> JacobianEntries:
    """Linearization at a coexistence equilibrium.

    The (2,2) entry uses the predator nullcline identity h(u*) = q + p*v*,
    so the entries are exact only at an equilibrium.
    """
    u, v = eq.u_star, eq.v_star
    g, g1, _, _ = _g_derivatives(u, p)
    h, h1, _, _ = _h_derivatives(u, p)
    return JacobianEntries(
        a11=g + u * g1 - h1 * v,
        a12=-h,
        a21=p.s * h1 * v,
        a22=-p.s * p.p * v,
    )


def is_locally_stable(J: JacobianEntries) -> bool:
    """Routh-Hurwitz test for a 2x2 system: negative trace, positive determinant."""
    return J.trace < 0.0 and J.det > 0.0


def hopf_threshold_s(p: KineticParams, eq: Equilibrium | None = None) -> float:
    """The feed-concentration value at which the equilibrium loses stability.

    The equilibrium itself does not move with s, while trace(J) is affine and
    strictly decreasing in s, so the trace-zero crossing has the closed form
    s_H = a11 / (p * v*).  Requires a11 > 0 (otherwise the trace never
    vanishes at positive s) and a positive determinant at the threshold.
    """
    if eq is None:
        eq = unique_equilibrium(p)
    u, v = eq.u_star, eq.v_star
    g, g1, _, _ = _g_derivatives(u, p)
    h, h1, _, _ = _h_derivatives(u, p)
    a11 = g + u * g1 - h1 * v
    if a11 <= 0.0:
        raise Infeasible(f"a11 = {a11:.6g} <= 0: no positive oscillatory threshold in s")
    s_h = a11 / (p.p * v)
    det = jacobian_at(eq, p.with_(s=s_h)).det
    if det <= 0.0:
        raise Infeasible(f"determinant {det:.6g} <= 0 at the candidate threshold")
    return s_h


def _trace_at_a(a: float, p: KineticParams) -> float:
    pa = p.with_(a=a)
    return jacobian_at(unique_equilibrium(pa), pa).trace


def hopf_threshold_a(p: KineticParams, bracket: tuple[float, float]) -> float:
    """Half-saturation value where trace(J) = 0, found by bracketed bisection.

    The bracket must straddle a sign change of the trace; the returned root
    satisfies |trace| < 1e-8.
    """
    lo, hi = bracket
    flo, fhi = _trace_at_a(lo, p), _trace_at_a(hi, p)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise NoSignChange(f"trace does not change sign on [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = _trace_at_a(mid, p)
        if fmid == 0.0 or hi - lo < _BISECT_WIDTH_TOL:
            break
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    a_root = 0.5 * (lo + hi)
    if abs(_trace_at_a(a_root, p)) >= 1e-8:
        raise NumericalFailure("trace residual above 1e-8 after bisection")
    return a_root


def taylor_coefficients(eq: Equilibrium, p: KineticParams) -> TaylorCoefficients:
    """Closed-form Taylor coefficients of both reaction terms at an equilibrium.

    With G(u) = u*g(u), the prey equation F1 = G(u) - h(u)*v has
    beta_i0 = G^(i)/i! - h^(i)/i! * v and beta_i1 = -h^(i)/i!; all beta_ij with
    j >= 2 vanish because F1 is affine in v.  The predator equation
    F2 = s*v*(h(u) - q - p*v) is quadratic in v with gamma02 = -s*p constant.
    """
    u, v = eq.u_star, eq.v_star
    g, g1, g2, g3 = _g_derivatives(u, p)
    h, h1, h2, h3 = _h_derivatives(u, p)
    G1 = g + u * g1
    G2 = 2.0 * g1 + u * g2
    G3 = 3.0 * g2 + u * g3
    s, pp, q = p.s, p.p, p.q
    return TaylorCoefficients(
        beta10=G1 - h1 * v,
        beta01=-h,
        beta20=0.5 * (G2 - h2 * v),
        beta11=-h1,
        beta02=0.0,
        beta30=(G3 - h3 * v) / 6.0,
        beta21=-0.5 * h2,
        beta12=0.0,
        beta03=0.0,
        gamma10=s * h1 * v,
        gamma01=s * (h - q - 2.0 * pp * v),
        gamma20=0.5 * s * v * h2,
        gamma11=s * h1,
        gamma02=-s * pp,
        gamma30=s * v * h3 / 6.0,
        gamma21=0.5 * s * h2,
        gamma12=0.0,
        gamma03=0.0,
    )


def first_lyapunov_number(p: KineticParams, eq: Equilibrium | None = None) -> float:
    """First Lyapunov number at a trace-zero (oscillatory-threshold) point.

    Negative values mean the bifurcating limit cycle is stable
    (super-critical); positive values mean sub-critical.  Requires
    |trace(J)| < 1e-8 and det(J) > 0.
    """
    if eq is None:
        eq = unique_equilibrium(p)
    J = jacobian_at(eq, p)
    if abs(J.trace) >= 1e-8:
        raise Infeasible(f"trace {J.trace:.3g} is not zero: not at an oscillatory threshold")
    if J.det <= 0.0:
        raise Infeasible(f"determinant {J.det:.3g} <= 0 at the threshold")
    t = taylor_coefficients(eq, p)
    b10, b01, b20, b11, b02 = t.beta10, t.beta01, t.beta20, t.beta11, t.beta02
    b30, b21, b12, b03 = t.beta30, t.beta21, t.beta12, t.beta03
    g10, g01, g20, g11, g02 = t.gamma10, t.gamma01, t.gamma20, t.gamma11, t.gamma02
    g30, g21, g12, g03 = t.gamma30, t.gamma21, t.gamma12, t.gamma03
    delta = b10 * g01 - b01 * g10
    if delta <= 0.0:
        raise Infeasible(f"delta = {delta:.3g} <= 0 at the threshold")
    bracket = (
        b10 * g10 * (b11 ** 2 + b11 * g02 + b02 * g11)
        + b10 * b01 * (g11 ** 2 + b20 * g11 + b11 * g02)
        + g10 ** 2 * (b11 * b02 + 2.0 * b02 * g02)
        - 2.0 * b10 * g10 * (g02 ** 2 - b02 * b20)
        - 2.0 * b10 * b01 * (b20 ** 2 - g20 * g02)
        - b01 ** 2 * (2.0 * b20 * g20 + g11 * g20)
        + (b01 * g10 - 2.0 * b10 ** 2) * (g11 * g02 - b11 * b20)
        - (b10 ** 2 + b01 * g10)
        * (
            3.0 * (g10 * g03 - b01 * b30)
            + 2.0 * b10 * (b21 + g12)
            + (g10 * b12 - b01 * g21)
        )
    )
    return -3.0 * math.pi / (2.0 * b01 * delta ** 1.5) * bracket


def integrate_temporal(
    p: KineticParams,
    u0: float,
    v0: float,
    t_end: float,
    n_samples: int = 4000,
    rtol: float = 1e-9,
    atol: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate the temporal (diffusion-free) model; returns (t, u, v)."""
    sol = solve_ivp(
        lambda _t, y: reaction_rates(y[0], y[1], p),
        (0.0, t_end),
        (u0, v0),
        method="RK45",
        t_eval=np.linspace(0.0, t_end, n_samples),
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise NumericalFailure(f"temporal integration failed: {sol.message}")
    return sol.t, sol.y[0], sol.y[1]
