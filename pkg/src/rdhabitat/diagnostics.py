"""Pattern classification, spectral measurement and transient metrics.

Analyses run over immutable snapshots and series produced by the solver.
The spectral transform is a 2-D type-II discrete cosine transform, the
natural basis for zero-flux boundaries: mode (n1, n2) of an Nx-by-Ny box of
side lengths (Lx, Ly) is the lattice cosine with wavenumber
pi*sqrt((n1/Lx)^2 + (n2/Ly)^2), the same lattice the mode analysis
enumerates.  No window is applied by default (settled patterns are close to
lattice-periodic; leakage bias is small), a cosine taper is available for
fields with strong wall contrast.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.fft import dctn
from scipy.stats import skew

from .domain import GridGeometry, Region, region_cells
from .errors import RegionNotRectangular
from .kinetics import Equilibrium, KineticParams
from .linstab import DiffusionPair
from .solver import (FieldState, SimConfig, TimeSeries, Verdict, VerdictKind,
                     run, to_flat)

HOMOGENEOUS_STD_FACTOR = 1e-4   # Homogeneous iff std(u) < factor * u_star
SKEW_THRESHOLD = 0.3            # |skewness| above this reads as spot polarity
CONFIDENCE_SCALE = 0.1          # logistic width for the skewness margin
ONSET_REL_THRESHOLD = 0.05      # |mean_u_D2 - u*|/u* crossing that marks onset
SETTLE_REL_TOLERANCE = 0.10     # envelope widths within this end the transient
_SMOOTH_SPAN = 200.0            # time units of median smoothing for settle test


class PatternTag(enum.Enum):
    HOT_SPOT = "HotSpot"
    COLD_SPOT = "ColdSpot"
    LABYRINTHINE = "Labyrinthine"
    HOMOGENEOUS = "Homogeneous"
    DYNAMIC = "Dynamic"


@dataclass(frozen=True)
class PatternClass:
    tag: PatternTag
    confidence: float


@dataclass(frozen=True)
class SpectralSummary:
    """Radial power peak and component counts; band_ok is None without a band."""

    k_peak: float
    band_ok: bool | None
    spot_count: int


@dataclass(frozen=True)
class TransientMetrics:
    """Invasion timing read off the D2 mean series; None marks never-happened."""

    t_onset_d2: float | None
    t_settle_d2: float | None
    peak_amplitude_d2: float | None


@dataclass(frozen=True)
class DivergenceCurve:
    t: np.ndarray
    distance: np.ndarray


def _logistic(margin: float) -> float:
    return 1.0 / (1.0 + math.exp(-margin / CONFIDENCE_SCALE))


def classify_pattern(final: FieldState, eq: Equilibrium, g: GridGeometry,
                     verdict: Verdict) -> PatternClass:
    """Label the final state of a run.

    Dynamic if the run never became stationary; Homogeneous if the spatial
    spread of u is negligible against u*; otherwise the sign of the skewness
    of u separates hot spots (long right tail) from cold spots (long left
    tail), with near-symmetric fields read as labyrinthine.  Confidence is a
    logistic map of the distance to the deciding threshold.
    """
    if verdict.kind is not VerdictKind.STATIONARY:
        return PatternClass(tag=PatternTag.DYNAMIC, confidence=1.0)
    u = to_flat(final.u, g)
    std = float(u.std())
    hom_threshold = HOMOGENEOUS_STD_FACTOR * eq.u_star
    if std < hom_threshold:
        return PatternClass(tag=PatternTag.HOMOGENEOUS, confidence=1.0 - std / hom_threshold)
    gamma = float(skew(u))
    if gamma > SKEW_THRESHOLD:
        return PatternClass(tag=PatternTag.HOT_SPOT, confidence=_logistic(gamma - SKEW_THRESHOLD))
    if gamma < -SKEW_THRESHOLD:
        return PatternClass(tag=PatternTag.COLD_SPOT, confidence=_logistic(-gamma - SKEW_THRESHOLD))
    return PatternClass(tag=PatternTag.LABYRINTHINE, confidence=_logistic(SKEW_THRESHOLD - abs(gamma)))


def _region_box(field: np.ndarray, g: GridGeometry, region: Region) -> np.ndarray:
    """Values of the field on a region's bounding box; the region must fill it."""
    sel = region_cells(g, region)
    iy, ix = np.nonzero(sel)
    if iy.size == 0:
        raise RegionNotRectangular(f"region {region.name} holds no cells")
    box = sel[iy.min():iy.max() + 1, ix.min():ix.max() + 1]
    if not box.all():
        raise RegionNotRectangular(f"region {region.name} does not fill its bounding box")
    return field[iy.min():iy.max() + 1, ix.min():ix.max() + 1]


def radial_spectrum(field: np.ndarray, g: GridGeometry, region: Region = Region.ALL,
                    band: tuple[float, float] | None = None,
                    taper: bool = False) -> SpectralSummary:
    """Dominant radial wavenumber and spot counts of a settled field.

    The mean-removed field on the region's bounding box is cosine-transformed
    (DCT-II), the squared coefficients are binned by radial wavenumber with
    bin width pi/max(Lx, Ly), and k_peak is the center of the most powerful
    bin.  band_ok says whether k_peak falls inside a supplied analytic band
    and is None when no band is given.  spot_count is the larger of the
    4-connected component counts above +0.5*std and below -0.5*std.
    """
    values = _region_box(field, g, region)
    ny, nx = values.shape
    dev = values - values.mean()

    windowed = dev
    if taper:
        wy = np.sin(math.pi * (np.arange(ny) + 0.5) / ny) ** 2
        wx = np.sin(math.pi * (np.arange(nx) + 0.5) / nx) ** 2
        windowed = dev * np.outer(wy, wx)

    power = dctn(windowed, type=2) ** 2
    ky = math.pi * np.arange(ny) / (ny * g.h)
    kx = math.pi * np.arange(nx) / (nx * g.h)
    k = np.sqrt(ky[:, None] ** 2 + kx[None, :] ** 2)
    dk = math.pi / (max(nx, ny) * g.h)
    bins = np.floor(k.ravel() / dk).astype(np.int64)
    binned = np.bincount(bins, weights=power.ravel())
    binned[0] = 0.0  # mean bin, already removed
    k_peak = (int(np.argmax(binned)) + 0.5) * dk

    band_ok = None
    if band is not None:
        k1, k2 = band
        band_ok = bool(k1 <= k_peak <= k2)

    std = dev.std()
    _, n_above = ndimage.label(dev > 0.5 * std)
    _, n_below = ndimage.label(dev < -0.5 * std)
    return SpectralSummary(k_peak=float(k_peak), band_ok=band_ok,
                           spot_count=int(max(n_above, n_below)))


def envelope_width(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Oscillation width upper - lower from successive local extrema.

    Local maxima and minima of the series are interpolated separately onto
    the full time grid; before the first extremum and after the last the
    nearest extremum extends flat.  A series with fewer than two extrema of
    a kind has zero width everywhere.
    """
    interior = np.arange(1, len(x) - 1)
    is_max = (x[interior] >= x[interior - 1]) & (x[interior] > x[interior + 1])
    is_min = (x[interior] <= x[interior - 1]) & (x[interior] < x[interior + 1])
    i_max, i_min = interior[is_max], interior[is_min]
    if i_max.size < 2 or i_min.size < 2:
        return np.zeros_like(x)
    upper = np.interp(t, t[i_max], x[i_max])
    lower = np.interp(t, t[i_min], x[i_min])
    return upper - lower


_N_SETTLE_CANDIDATES = 256


def transient_metrics(series: TimeSeries, eq: Equilibrium,
                      onset_rel: float = ONSET_REL_THRESHOLD,
                      settle_rel: float = SETTLE_REL_TOLERANCE) -> TransientMetrics:
    """Invasion onset, settling time and peak oscillation amplitude for D2.

    Onset is the first series time with |mean_u_D2 - u*| exceeding
    onset_rel relatively.  Settling is the first time from which onward the
    D1 and D2 envelope widths agree: chaotic envelope widths mix slowly, so
    the comparison uses the median width over everything after the
    candidate time, and settling requires those forward medians to differ
    by less than settle_rel (relative to D1's) while the smoothed D2 width
    at the candidate itself has already come down to that level.  Candidates
    are searched only from the crest of the smoothed D2 width onward, so the
    settle time always follows the transient it closes; with the local width
    condition this stops a long matched tail from ending the transient while
    it is still in progress.  The peak amplitude is half the
    maximum D2 envelope width.  Fields are None when the event never
    happens (including an all-NaN D2 column).
    """
    t = series.t
    u2 = series.mean_u_d2
    if np.isnan(u2).all():
        return TransientMetrics(t_onset_d2=None, t_settle_d2=None, peak_amplitude_d2=None)

    crossed = np.abs(u2 - eq.u_star) > onset_rel * eq.u_star
    t_onset = float(t[np.argmax(crossed)]) if crossed.any() else None

    w1 = envelope_width(t, series.mean_u_d1)
    w2 = envelope_width(t, u2)
    peak_amplitude = float(w2.max() / 2.0) if w2.max() > 0 else None

    t_settle = None
    if t_onset is not None:
        dt_series = t[1] - t[0] if len(t) > 1 else 1.0
        n_smooth = max(3, int(round(_SMOOTH_SPAN / dt_series)) | 1)
        w2_smooth = ndimage.median_filter(w2, size=n_smooth, mode="nearest")
        i_onset = int(np.argmax(crossed))
        # settling can only happen once the transient has crested, so the
        # search starts at the smoothed-width maximum; otherwise the small
        # pre-transient width passes every test right at onset
        i_start = max(i_onset, int(np.argmax(w2_smooth)))
        stride = max(1, (len(t) - i_start) // _N_SETTLE_CANDIDATES)
        for i in range(i_start, len(t) - 1, stride):
            m1 = float(np.median(w1[i:]))
            m2 = float(np.median(w2[i:]))
            if m1 <= 0:
                continue
            # remaining-run medians must agree, and the local (smoothed)
            # D2 width must already be down at that level, so candidates
            # inside the large-amplitude transient are rejected even when
            # a long matched tail dominates the median
            if abs(m2 - m1) / m1 < settle_rel and w2_smooth[i] <= (1.0 + settle_rel) * m1:
                t_settle = float(t[i])
                break
    return TransientMetrics(t_onset_d2=t_onset, t_settle_d2=t_settle,
                            peak_amplitude_d2=peak_amplitude)


def perturb_single_cell(ic: FieldState, g: GridGeometry, amplitude: float = 1e-8) -> FieldState:
    """Copy of an initial state with one center cell's u nudged by amplitude."""
    u = ic.u.copy()
    iy, ix = np.nonzero(g.mask)
    mid = iy.size // 2
    u[iy[mid], ix[mid]] += amplitude
    return FieldState(u=u, v=ic.v.copy(), t=ic.t)


def twin_divergence(cfg: SimConfig, ic: FieldState, ic_perturbed: FieldState,
                    p: KineticParams, d: DiffusionPair, g: GridGeometry) -> DivergenceCurve:
    """Root-mean-square distance between two runs, sampled at snapshot times.

    Sustained exponential growth of the distance before saturation marks
    sensitive dependence on the initial condition; a stable pattern keeps
    the distance at or below its initial size.
    """
    res_a = run(cfg, ic, p, d, g, stationarity_tol=0.0)
    res_b = run(cfg, ic_perturbed, p, d, g, stationarity_tol=0.0)
    ts, dist = [], []
    for sa, sb in zip(res_a.snapshots, res_b.snapshots):
        du = to_flat(sa.u, g) - to_flat(sb.u, g)
        dv = to_flat(sa.v, g) - to_flat(sb.v, g)
        ts.append(sa.t)
        dist.append(math.sqrt(float(np.mean(du * du) + np.mean(dv * dv))))
    return DivergenceCurve(t=np.array(ts), distance=np.array(dist))
