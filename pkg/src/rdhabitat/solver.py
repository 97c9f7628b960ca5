"""Explicit finite-difference integration of the reaction-diffusion model.

Forward Euler on the masked cell grid with the mirror-neighbor 5-point
Laplacian.  The step kernel is data-parallel over cells and every cell
writes only its own entry, so results are bitwise identical for any worker
thread count; all reductions (means, norms, stationarity checks) run
single-threaded in numpy with a fixed summation order.  Random numbers are
drawn only while building initial conditions, from a counter-based Philox
generator, so a (seed, config, geometry) triple pins the entire run.

The time step is snapped to an integer divisor of series_every, which keeps
series and snapshot timestamps exact multiples of their cadences; a negative
density mid-run halves the step (the divisor doubles) and retries the
current series interval.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .domain import (GridGeometry, Region, boundary_stencil_info, region_cells,
                     region_flat_mask)
from .errors import BlowUp, ConfigError, EmptyRegion, NumericalFailure, ShapeMismatch
from .kinetics import Equilibrium, KineticParams
from .linstab import DiffusionPair

BLOWUP_LIMIT = 1.0e6
MAX_DT_HALVINGS = 5
GENERATOR_NAME = "numpy-philox4x64-standard-normal"

# Neighbor tables are pure functions of the geometry; memoize by object
# identity so per-step callers do not rebuild them.
_nb_memo: dict[int, tuple[GridGeometry, np.ndarray]] = {}


def _neighbor_table(g: GridGeometry) -> np.ndarray:
    hit = _nb_memo.get(id(g))
    if hit is not None and hit[0] is g:
        return hit[1]
    if len(_nb_memo) > 32:
        _nb_memo.clear()
    nb = boundary_stencil_info(g)
    _nb_memo[id(g)] = (g, nb)
    return nb


class FillMode(enum.Enum):
    ZERO = "zero"
    HOMOGENEOUS = "homogeneous"


class VerdictKind(enum.Enum):
    STATIONARY = "Stationary"
    RAN_TO_END = "RanToEnd"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    t_settle: float | None = None


@dataclass(frozen=True)
class FieldState:
    """Prey and predator density grids at one instant; NaN outside the mask."""

    u: np.ndarray
    v: np.ndarray
    t: float


@dataclass(frozen=True)
class SimConfig:
    """Run parameters; dt is an optional upper bound on the auto-chosen step."""

    t_end: float
    dt: float | None = None
    snapshot_every: float = 50.0
    series_every: float = 0.5
    seed: int = 0
    epsilon: float = 0.01
    safety: float = 0.8

    def __post_init__(self):
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (self.snapshot_every > 0 and self.series_every > 0):
            raise ConfigError("snapshot_every and series_every must be positive")
        if not 0 < self.safety <= 1:
            raise ConfigError(f"safety factor must be in (0, 1], got {self.safety}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")
        if not (isinstance(self.seed, (int, np.integer)) and self.seed >= 0):
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")


@dataclass(frozen=True)
class TimeSeries:
    """Region-mean trajectories; D2 columns are NaN when the domain has no D2."""

    t: np.ndarray
    mean_u_d1: np.ndarray
    mean_v_d1: np.ndarray
    mean_u_d2: np.ndarray
    mean_v_d2: np.ndarray
    mean_u_all: np.ndarray
    mean_v_all: np.ndarray


@dataclass(frozen=True)
class RunResult:
    snapshots: tuple[FieldState, ...]
    series: TimeSeries
    verdict: Verdict
    dt_final: float
    halvings: int


@njit(parallel=True, cache=True)
def _euler_kernel(u, v, un, vn, nb, inv_h2, d1, d2, dt, r, f, m, b, c, q, pp, s, a, react, limit):
    bad = 0
    neg = 0
    for i in prange(u.shape[0]):
        lap_u = (u[nb[i, 0]] + u[nb[i, 1]] + u[nb[i, 2]] + u[nb[i, 3]] - 4.0 * u[i]) * inv_h2
        lap_v = (v[nb[i, 0]] + v[nb[i, 1]] + v[nb[i, 2]] + v[nb[i, 3]] - 4.0 * v[i]) * inv_h2
        ui = u[i]
        vi = v[i]
        du = d1 * lap_u
        dv = d2 * lap_v
        if react:
            du += ui * (r - f * ui - m / (b + ui) - c * vi / (ui + a))
            dv += s * vi * (c * ui / (ui + a) - q - pp * vi)
        nu = ui + dt * du
        nv = vi + dt * dv
        un[i] = nu
        vn[i] = nv
        if not (math.isfinite(nu) and math.isfinite(nv)) or abs(nu) > limit or abs(nv) > limit:
            bad += 1
        elif nu < 0.0 or nv < 0.0:
            neg += 1
    return bad, neg


def to_flat(field: np.ndarray, g: GridGeometry) -> np.ndarray:
    """Interior values of a (ny, nx) grid in canonical row-major order."""
    if field.shape != (g.ny, g.nx):
        raise ShapeMismatch(f"field shape {field.shape} does not match grid ({g.ny}, {g.nx})")
    return np.ascontiguousarray(field[g.mask], dtype=np.float64)


def to_grid(flat: np.ndarray, g: GridGeometry) -> np.ndarray:
    """Scatter a flat interior vector back to a (ny, nx) grid; NaN outside."""
    if flat.shape != (g.n_interior,):
        raise ShapeMismatch(f"flat vector length {flat.shape} does not match {g.n_interior} interior cells")
    out = np.full((g.ny, g.nx), np.nan)
    out[g.mask] = flat
    return out


def make_ic_noise(eq: Equilibrium, epsilon: float, seed: int, g: GridGeometry,
                  region: Region = Region.ALL) -> FieldState:
    """Homogeneous state plus white Gaussian noise on the chosen region.

    Independent standard-normal draws per cell, u-field first then v-field,
    each in row-major order over the region's cells; cells outside the
    region stay exactly at (u*, v*).  Negative cells are clamped to zero
    (initialization only).
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    if region not in (Region.ALL, Region.D1):
        raise ValueError(f"noise region must be ALL or D1, got {region.name}")
    sel = region_flat_mask(g, region)
    rng = np.random.Generator(np.random.Philox(seed))
    u = np.full(g.n_interior, eq.u_star)
    v = np.full(g.n_interior, eq.v_star)
    u[sel] += epsilon * rng.standard_normal(int(sel.sum()))
    v[sel] += epsilon * rng.standard_normal(int(sel.sum()))
    np.maximum(u, 0.0, out=u)
    np.maximum(v, 0.0, out=v)
    return FieldState(u=to_grid(u, g), v=to_grid(v, g), t=0.0)


def make_ic_from_snapshot(snap: FieldState, fill: FillMode, g: GridGeometry,
                          eq: Equilibrium | None = None) -> FieldState:
    """Copy a snapshot's D1 cells and refill D2 as homogeneous or empty.

    The snapshot may live on g's full grid or on the bounding box of g's D1
    region (a pattern settled on the left patch alone, before the habitat
    is enlarged).  D1 cells are copied bitwise, D2 cells are set to
    (u*, v*) for HOMOGENEOUS (eq required) or to (0, 0) for ZERO.  Time
    restarts at 0.
    """
    if fill is FillMode.HOMOGENEOUS and eq is None:
        raise ValueError("HOMOGENEOUS fill needs the equilibrium")
    d1_cells = region_cells(g, Region.D1)
    iy, ix = np.nonzero(d1_cells)
    box = (slice(iy.min(), iy.max() + 1), slice(ix.min(), ix.max() + 1))
    box_shape = (box[0].stop - box[0].start, box[1].stop - box[1].start)
    if snap.u.shape == (g.ny, g.nx):
        src_u, src_v = snap.u[box], snap.v[box]
    elif snap.u.shape == box_shape:
        src_u, src_v = snap.u, snap.v
    else:
        raise ShapeMismatch(
            f"snapshot shape {snap.u.shape} matches neither the grid ({g.ny}, {g.nx}) "
            f"nor the D1 bounding box {box_shape}"
        )
    in_box = d1_cells[box]
    if np.isnan(src_u[in_box]).any() or np.isnan(src_v[in_box]).any():
        raise ShapeMismatch("snapshot does not cover all D1 cells of this geometry")
    d1 = region_flat_mask(g, Region.D1)
    d2 = ~d1
    u = np.empty(g.n_interior)
    v = np.empty(g.n_interior)
    u2d = np.full((g.ny, g.nx), np.nan)
    v2d = np.full((g.ny, g.nx), np.nan)
    u2d[box], v2d[box] = src_u, src_v
    u[d1], v[d1] = u2d[g.mask][d1], v2d[g.mask][d1]
    if fill is FillMode.ZERO:
        u[d2] = 0.0
        v[d2] = 0.0
    else:
        u[d2] = eq.u_star
        v[d2] = eq.v_star
    return FieldState(u=to_grid(u, g), v=to_grid(v, g), t=0.0)


def laplacian(field: np.ndarray, g: GridGeometry) -> np.ndarray:
    """Mirror-neighbor 5-point Laplacian of a (ny, nx) field; NaN outside."""
    nb = _neighbor_table(g)
    f = to_flat(field, g)
    lap = (f[nb[:, 0]] + f[nb[:, 1]] + f[nb[:, 2]] + f[nb[:, 3]] - 4.0 * f) / g.h ** 2
    return to_grid(lap, g)


def max_stable_dt(h: float, d: DiffusionPair, safety: float = 0.8) -> float:
    """Diffusive stability bound safety*h^2/(4*max(d1,d2)) for the explicit scheme."""
    return safety * h * h / (4.0 * max(d.d1, d.d2))


def resolve_dt(cfg: SimConfig, h: float, d: DiffusionPair) -> tuple[float, int]:
    """Largest dt within the stability bound that divides series_every exactly.

    Returns (dt, steps per series interval).  An explicit cfg.dt acts as an
    additional upper bound and passes through the same snapping.
    """
    bound = max_stable_dt(h, d, cfg.safety)
    if cfg.dt is not None:
        bound = min(bound, cfg.dt)
    m = max(1, math.ceil(cfg.series_every / bound - 1e-9))
    return cfg.series_every / m, m


def _cadence_ratio(outer: float, inner: float, what: str) -> int:
    ratio = outer / inner
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"{what} ({outer}) must be a positive integer multiple of {inner}")
    return k


def step(state: FieldState, p: KineticParams, d: DiffusionPair, dt: float,
         g: GridGeometry, reaction: bool = True) -> FieldState:
    """One forward-Euler step; raises BlowUp past the magnitude limit.

    Negative densities are returned as-is here; only run() applies the
    step-halving guard.
    """
    nb = _neighbor_table(g)
    u, v = to_flat(state.u, g), to_flat(state.v, g)
    un, vn = np.empty_like(u), np.empty_like(v)
    bad, _ = _euler_kernel(
        u, v, un, vn, nb, 1.0 / g.h ** 2, d.d1, d.d2, dt,
        p.r, p.f, p.m, p.b, p.c, p.q, p.p, p.s, p.a, reaction, BLOWUP_LIMIT,
    )
    if bad:
        raise BlowUp(f"{bad} cells exceeded {BLOWUP_LIMIT:g} or became non-finite", t=state.t + dt)
    return FieldState(u=to_grid(un, g), v=to_grid(vn, g), t=state.t + dt)


def spatial_average(state: FieldState, g: GridGeometry, region: Region) -> tuple[float, float]:
    """Arithmetic mean of (u, v) over a region's interior cells."""
    sel = region_flat_mask(g, region)
    n = int(sel.sum())
    if n == 0:
        raise EmptyRegion(f"region {region.name} holds no cells in this geometry")
    u, v = to_flat(state.u, g), to_flat(state.v, g)
    return float(u[sel].sum() / n), float(v[sel].sum() / n)


def stationarity_check(s1: FieldState, s2: FieldState, tol: float) -> bool:
    """True iff the max-norm change rate between two states is below tol."""
    if not s2.t > s1.t:
        raise ValueError(f"states must be time-ordered, got t1={s1.t}, t2={s2.t}")
    span = s2.t - s1.t
    rate_u = np.nanmax(np.abs(s2.u - s1.u)) / span
    rate_v = np.nanmax(np.abs(s2.v - s1.v)) / span
    return bool(rate_u < tol and rate_v < tol)


def run(cfg: SimConfig, ic: FieldState, p: KineticParams, d: DiffusionPair,
        g: GridGeometry, stationarity_tol: float = 1e-6,
        check_after: float = 0.0) -> RunResult:
    """Integrate to t_end or until consecutive snapshots become stationary.

    Snapshots land on exact multiples of snapshot_every, series rows on
    exact multiples of series_every; t_end and snapshot_every must be
    integer multiples of series_every.  A negative density halves dt and
    retries the current series interval (at most MAX_DT_HALVINGS times per
    run); magnitude overflow raises BlowUp with the last good state.

    Stationarity is judged on consecutive snapshot pairs, skipping pairs
    that end at or before check_after: slowly growing modes pass through a
    low-rate phase right after the initial noise decays, and a burn-in
    keeps that dip from reading as a settled state.  stationarity_tol=0
    disables early stopping entirely.
    """
    n_series = _cadence_ratio(cfg.t_end, cfg.series_every, "t_end")
    k_snap = _cadence_ratio(cfg.snapshot_every, cfg.series_every, "snapshot_every")
    dt, m_steps = resolve_dt(cfg, g.h, d)

    nb = _neighbor_table(g)
    inv_h2 = 1.0 / g.h ** 2
    d1_sel = region_flat_mask(g, Region.D1)
    d2_sel = region_flat_mask(g, Region.D2)
    n_d1, n_d2 = int(d1_sel.sum()), int(d2_sel.sum())

    u, v = to_flat(ic.u, g), to_flat(ic.v, g)
    if np.isnan(u).any() or np.isnan(v).any():
        raise ShapeMismatch("initial condition does not cover every interior cell")
    un, vn = np.empty_like(u), np.empty_like(v)

    rows = []

    def record_row(t):
        mu1 = u[d1_sel].sum() / n_d1 if n_d1 else math.nan
        mv1 = v[d1_sel].sum() / n_d1 if n_d1 else math.nan
        mu2 = u[d2_sel].sum() / n_d2 if n_d2 else math.nan
        mv2 = v[d2_sel].sum() / n_d2 if n_d2 else math.nan
        rows.append((t, mu1, mv1, mu2, mv2, u.sum() / u.size, v.sum() / v.size))

    def snapshot(t):
        return FieldState(u=to_grid(u, g), v=to_grid(v, g), t=t)

    record_row(0.0)
    snapshots = [snapshot(0.0)]
    verdict = Verdict(kind=VerdictKind.RAN_TO_END)
    halvings = 0

    for j in range(1, n_series + 1):
        u_save, v_save = u.copy(), v.copy()
        t_start = (j - 1) * cfg.series_every
        while True:
            failed_at = -1
            for i in range(m_steps):
                bad, neg = _euler_kernel(
                    u, v, un, vn, nb, inv_h2, d.d1, d.d2, dt,
                    p.r, p.f, p.m, p.b, p.c, p.q, p.p, p.s, p.a, True, BLOWUP_LIMIT,
                )
                if bad:
                    raise BlowUp(
                        f"{bad} cells exceeded {BLOWUP_LIMIT:g} or became non-finite",
                        t=t_start + (i + 1) * dt,
                        state=snapshot(t_start + i * dt),
                    )
                if neg:
                    failed_at = i
                    break
                u, un = un, u
                v, vn = vn, v
            if failed_at < 0:
                break
            halvings += 1
            if halvings > MAX_DT_HALVINGS:
                raise NumericalFailure(
                    f"negative densities persist after {MAX_DT_HALVINGS} step halvings (dt={dt:g})"
                )
            dt *= 0.5
            m_steps *= 2
            u[:], v[:] = u_save, v_save
        t_now = j * cfg.series_every
        record_row(t_now)
        if j % k_snap == 0:
            snapshots.append(snapshot(t_now))
            if t_now > check_after and stationarity_check(
                    snapshots[-2], snapshots[-1], stationarity_tol):
                verdict = Verdict(kind=VerdictKind.STATIONARY, t_settle=t_now)
                break

    cols = np.array(rows, dtype=np.float64)
    series = TimeSeries(
        t=cols[:, 0], mean_u_d1=cols[:, 1], mean_v_d1=cols[:, 2],
        mean_u_d2=cols[:, 3], mean_v_d2=cols[:, 4],
        mean_u_all=cols[:, 5], mean_v_all=cols[:, 6],
    )
    return RunResult(snapshots=tuple(snapshots), series=series, verdict=verdict,
                     dt_final=dt, halvings=halvings)
