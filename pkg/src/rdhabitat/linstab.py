"""Spatial linear-stability analysis of the reaction-diffusion model.

Perturbing the homogeneous coexistence state with a cosine eigenmode of
wavenumber k turns the linearized PDE into a 2x2 eigenvalue problem for
M(k) = J - diag(d1, d2)*k^2.  Diffusion-driven (Turing) instability occurs
when h(k^2) = det(M(k)) dips below zero on a band (k1, k2) while the
diffusion-free state stays stable.  This module evaluates the dispersion
relation, the instability band, the critical diffusion ratio, admissible
cosine modes on a square of side L, and regime maps over the (a, d2) plane.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import Infeasible, NoBand, PoleAtMode
from .kinetics import (
    JacobianEntries,
    KineticParams,
    hopf_threshold_a,
    jacobian_at,
    unique_equilibrium,
)


@dataclass(frozen=True)
class DiffusionPair:
    """Diffusion coefficients of prey (d1) and predator (d2)."""

    d1: float
    d2: float

    def __post_init__(self):
        if not (self.d1 > 0 and self.d2 > 0):
            raise ValueError(f"diffusion coefficients must be positive, got d1={self.d1}, d2={self.d2}")


@dataclass(frozen=True)
class DispersionResult:
    """Dispersion relation samples plus the closed-form band quantities.

    samples is an (n, 3) array with columns (k, max Re lambda, Im lambda of
    the leading eigenvalue), ordered by increasing k.
    """

    samples: np.ndarray
    k1: float
    k2: float
    k_argmax: float
    k_c: float


@dataclass(frozen=True)
class ModeSet:
    """Admissible cosine eigenmodes (n1, n2) on a square of side L.

    dominant is None when the band contains no lattice mode at this L.
    """

    L: float
    admissible: tuple[tuple[int, int], ...]
    dominant: tuple[int, int] | None


class Regime(enum.Enum):
    HOMOGENEOUS_STABLE = "HomogeneousStable"
    PURE_TURING = "PureTuring"
    TURING_HOPF = "TuringHopf"
    HOPF_ONLY = "HopfOnly"


@dataclass(frozen=True)
class RegimeMapResult:
    """Regime labels over an (a, d2) grid; labels[i][j] is at (a_values[i], d2_values[j]).

    turing_curve_d2 holds the critical diffusion ratio per a (NaN where the
    boundary is infeasible); hopf_line_a is the trace-zero crossing inside
    the a range, or None when the trace does not change sign there.
    """

    a_values: np.ndarray
    d2_values: np.ndarray
    labels: tuple[tuple[Regime, ...], ...]
    turing_curve_d2: np.ndarray
    hopf_line_a: float | None


def h_of_k2(k2_val, J: JacobianEntries, d: DiffusionPair):
    """det(M(k)) as a quadratic in k^2; negative values mark unstable modes."""
    return d.d1 * d.d2 * k2_val ** 2 - (d.d2 * J.a11 + d.d1 * J.a22) * k2_val + J.det


def trace_m(k2_val, J: JacobianEntries, d: DiffusionPair):
    """trace(M(k)); strictly decreasing in k^2."""
    return J.trace - (d.d1 + d.d2) * k2_val


def eigenvalues_at_k(k: float, J: JacobianEntries, d: DiffusionPair) -> tuple[complex, complex]:
    """Both eigenvalues of M(k), ordered by descending real part.

    Roots of lambda^2 - trace(M)*lambda + h(k^2) = 0; complex pairs are
    returned conjugate with the positive imaginary part first.
    """
    tr = trace_m(k * k, J, d)
    disc = complex(tr * tr - 4.0 * h_of_k2(k * k, J, d))
    root = cmath.sqrt(disc)
    lam_a = 0.5 * (tr + root)
    lam_b = 0.5 * (tr - root)
    if (lam_a.real, lam_a.imag) >= (lam_b.real, lam_b.imag):
        return lam_a, lam_b
    return lam_b, lam_a


def band_edges(J: JacobianEntries, d: DiffusionPair) -> tuple[float, float]:
    """Edges (k1, k2) of the unstable band where h(k^2) < 0.

    k1,2^2 = (B -/+ sqrt(B^2 - 4*d1*d2*det)) / (2*d1*d2) with
    B = d2*a11 + d1*a22.  Raises NoBand when B <= 0 or the discriminant is
    negative (h never dips below zero).
    """
    B = d.d2 * J.a11 + d.d1 * J.a22
    if B <= 0.0:
        raise NoBand(f"no unstable band: d2*a11 + d1*a22 = {B:.6g} <= 0")
    disc = B * B - 4.0 * d.d1 * d.d2 * J.det
    if disc < 0.0:
        raise NoBand(f"no unstable band: discriminant {disc:.6g} < 0")
    root = math.sqrt(disc)
    k1_sq = (B - root) / (2.0 * d.d1 * d.d2)
    k2_sq = (B + root) / (2.0 * d.d1 * d.d2)
    return math.sqrt(max(k1_sq, 0.0)), math.sqrt(k2_sq)


def critical_wavenumber(J: JacobianEntries, d: DiffusionPair) -> float:
    """Wavenumber minimizing h(k^2): k_c = sqrt((d2*a11 + d1*a22)/(2*d1*d2))."""
    B = d.d2 * J.a11 + d.d1 * J.a22
    if B <= 0.0:
        raise Infeasible(f"d2*a11 + d1*a22 = {B:.6g} <= 0: h has no interior minimum")
    return math.sqrt(B / (2.0 * d.d1 * d.d2))


def _re_lambda_max(k: float, J: JacobianEntries, d: DiffusionPair) -> float:
    return eigenvalues_at_k(k, J, d)[0].real


def sample_dispersion(J: JacobianEntries, d: DiffusionPair, k_max: float, n: int = 512) -> np.ndarray:
    """(n, 3) samples of (k, Re lambda_max, Im lambda) on a uniform k-grid.

    Works with or without an unstable band; dispersion_curve wraps this with
    band bookkeeping.
    """
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if not k_max > 0:
        raise ValueError(f"k_max must be positive, got {k_max}")
    ks = np.linspace(0.0, k_max, n)
    samples = np.empty((n, 3))
    for i, k in enumerate(ks):
        lam = eigenvalues_at_k(float(k), J, d)[0]
        samples[i] = (k, lam.real, lam.imag)
    return samples


def dispersion_curve(J: JacobianEntries, d: DiffusionPair, k_max: float | None = None, n: int = 512) -> DispersionResult:
    """Sample the dispersion relation and locate the fastest-growing mode.

    Samples Re lambda_max and Im lambda on n uniform wavenumbers up to k_max
    (default 2*k2).  Band edges come from the closed form; k_argmax refines
    the best grid sample by bounded scalar minimization (golden-section
    bracketing) to 1e-6.  Raises NoBand when no unstable band exists.
    """
    k1, k2 = band_edges(J, d)
    if k_max is None:
        k_max = 2.0 * k2
    samples = sample_dispersion(J, d, k_max, n)
    ks = samples[:, 0]
    i_best = int(np.argmax(samples[:, 1]))
    lo = float(ks[max(i_best - 1, 0)])
    hi = float(ks[min(i_best + 1, n - 1)])
    res = minimize_scalar(
        lambda k: -_re_lambda_max(k, J, d), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-6},
    )
    k_argmax = float(res.x)
    return DispersionResult(
        samples=samples,
        k1=k1,
        k2=k2,
        k_argmax=k_argmax,
        k_c=critical_wavenumber(J, d),
    )


def turing_boundary_d2(J: JacobianEntries, d1: float) -> float:
    """Critical predator diffusion d_2T where the band first appears.

    Solves d2*a11 + d1*a22 = 2*sqrt(d1*d2)*sqrt(det) as a quadratic in
    sqrt(d2) and keeps the root with h_min < 0 for d2 just above it (the
    state is stable for d2 < d_2T and unstable for d2 > d_2T).  Requires
    a11 > 0, a22 < 0 and det > 0.
    """
    if not (J.a11 > 0.0 and J.a22 < 0.0 and J.det > 0.0):
        raise Infeasible(
            f"Turing boundary needs a11 > 0, a22 < 0, det > 0; got a11={J.a11:.6g}, a22={J.a22:.6g}, det={J.det:.6g}"
        )
    if d1 <= 0.0:
        raise ValueError(f"d1 must be positive, got {d1}")
    # roots of a11*x^2 - 2*sqrt(d1*det)*x + d1*a22 = 0 with x = sqrt(d2)
    sq = math.sqrt(d1 * J.det)
    disc = d1 * J.det - J.a11 * J.a22 * d1
    candidates = [(sq + math.sqrt(disc)) / J.a11, (sq - math.sqrt(disc)) / J.a11]
    for x in candidates:
        if x <= 0.0:
            continue
        d2t = x * x
        above = h_of_k2(critical_wavenumber(J, DiffusionPair(d1, d2t * 1.001)) ** 2, J, DiffusionPair(d1, d2t * 1.001))
        if above < 0.0:
            return d2t
    raise Infeasible("no boundary root with instability on the upper side")


def d2T_mode(n1: int, n2: int, L: float, J: JacobianEntries, d1: float) -> float:
    """Critical d2 at which the (n1, n2) cosine mode becomes neutral.

    Solving h(k^2) = 0 for d2 at k^2 = (n1^2 + n2^2)*(pi/L)^2 gives
    d2 = (d1*a22*k^2 - a11*a22 + a12*a21) / (k^2*(d1*k^2 - a11)); the
    expression has a pole where the denominator vanishes (k^2 = 0 or
    k^2 = a11/d1).
    """
    k_sq = (n1 * n1 + n2 * n2) * (math.pi / L) ** 2
    denom = k_sq * (d1 * k_sq - J.a11)
    if abs(denom) < 1e-12 * max(1.0, abs(J.a11)):
        raise PoleAtMode(f"mode ({n1},{n2}) at L={L}: denominator k^2*(d1*k^2 - a11) = {denom:.3g}")
    return (d1 * J.a22 * k_sq - J.a11 * J.a22 + J.a12 * J.a21) / denom


def admissible_modes(J: JacobianEntries, d: DiffusionPair, L: float, n_cap: int | None = None) -> ModeSet:
    """Cosine modes (n1, n2) whose wavenumber falls strictly inside the band.

    Enumerates 0 <= n1, n2 <= n_cap (default ceil(L*k2/pi)+1, covering the
    band) with k1 < pi/L*sqrt(n1^2+n2^2) < k2.  The dominant mode minimizes
    the distance to k_argmax; ties break by smaller |n1 - n2|, then n1.
    """
    k1, k2 = band_edges(J, d)
    if n_cap is None:
        n_cap = math.ceil(L * k2 / math.pi) + 1
    omega = math.pi / L
    n_vals = np.arange(n_cap + 1)
    k_grid = omega * np.sqrt(n_vals[:, None] ** 2 + n_vals[None, :] ** 2)
    inside = (k_grid > k1) & (k_grid < k2)
    pairs = [(int(i), int(j)) for i, j in zip(*np.nonzero(inside))]
    if not pairs:
        return ModeSet(L=L, admissible=(), dominant=None)
    k_argmax = dispersion_curve(J, d).k_argmax
    dominant = min(
        pairs,
        key=lambda nm: (abs(omega * math.hypot(nm[0], nm[1]) - k_argmax), abs(nm[0] - nm[1]), nm[0]),
    )
    return ModeSet(L=L, admissible=tuple(pairs), dominant=dominant)


def classify_regime(J: JacobianEntries, d: DiffusionPair) -> Regime:
    """Label a parameter point from temporal stability and band existence."""
    stable = J.trace < 0.0 and J.det > 0.0
    try:
        band_edges(J, d)
        band = True
    except NoBand:
        band = False
    if stable:
        return Regime.PURE_TURING if band else Regime.HOMOGENEOUS_STABLE
    return Regime.TURING_HOPF if band else Regime.HOPF_ONLY


def regime_map(
    p: KineticParams,
    a_range: tuple[float, float],
    d2_range: tuple[float, float],
    resolution: int,
    d1: float,
) -> RegimeMapResult:
    """Regime labels over a uniform (a, d2) grid at fixed d1 and template p.

    The equilibrium and Jacobian are recomputed per a (they do not depend on
    d2); equilibrium-solving failures propagate.  Alongside the labels the
    map carries the Turing boundary curve d_2T(a) (NaN where infeasible) and
    the in-range Hopf line, if the trace changes sign.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be at least 2, got {resolution}")
    a_values = np.linspace(a_range[0], a_range[1], resolution)
    d2_values = np.linspace(d2_range[0], d2_range[1], resolution)
    labels = []
    curve = np.full(resolution, np.nan)
    traces = np.empty(resolution)
    for i, a in enumerate(a_values):
        pa = p.with_(a=float(a))
        J = jacobian_at(unique_equilibrium(pa), pa)
        traces[i] = J.trace
        try:
            curve[i] = turing_boundary_d2(J, d1)
        except Infeasible:
            pass
        labels.append(tuple(classify_regime(J, DiffusionPair(d1, float(d2))) for d2 in d2_values))
    hopf_a = None
    crossing = np.nonzero(np.diff(np.sign(traces)) != 0)[0]
    if crossing.size:
        i = int(crossing[0])
        hopf_a = hopf_threshold_a(p, (float(a_values[i]), float(a_values[i + 1])))
    return RegimeMapResult(
        a_values=a_values,
        d2_values=d2_values,
        labels=tuple(labels),
        turing_curve_d2=curve,
        hopf_line_a=hopf_a,
    )
