"""Habitat geometry: rectilinear domains rasterized to masked cell grids.

Domains are unions of axis-aligned rectangles anchored at non-negative
coordinates.  The fragmented habitat is a U-shaped union of a left patch
[0,Lx1]x[0,L2], a connecting corridor [Lx1,Lx1+Lx2]x[0,Ly] and a right
patch [Lx1+Lx2,L1]x[0,L2]; the corridor plus right patch form the region
D2 that the left-patch dynamics invades.  Rasterization is cell-centered:
cell (ix, iy) has its center at ((ix+0.5)h, (iy+0.5)h) and belongs to the
domain iff the center lies inside some rectangle.  Zero-flux boundaries are
realized by mirror ghost cells, so a missing neighbor reflects the center
cell; this keeps the 5-point Laplacian conservative on stair-step walls.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DegenerateDomain, DisconnectedDomain, EmptyRegion

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class Region(enum.IntEnum):
    """Per-cell region labels plus the composite queries D2 and ALL.

    Only OUTSIDE, D1, CORRIDOR and RIGHT_PATCH appear as cell labels;
    D2 = CORRIDOR + RIGHT_PATCH and ALL = every interior cell exist only as
    query values for region selection.
    """

    OUTSIDE = 0
    D1 = 1
    CORRIDOR = 2
    RIGHT_PATCH = 3
    D2 = 4
    ALL = 5


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0,x1] x [y0,y1] in length units."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 >= 0 and self.y0 >= 0):
            raise ValueError(f"rectangle corners must be non-negative, got ({self.x0}, {self.y0})")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"rectangle must have positive extent, got {self}")


@dataclass(frozen=True)
class DomainSpec:
    """A union of labeled rectangles; construct via square(), ushape() or rect_union()."""

    rects: tuple[Rect, ...]
    labels: tuple[Region, ...]

    def __post_init__(self):
        if not self.rects:
            raise ValueError("domain needs at least one rectangle")
        if len(self.rects) != len(self.labels):
            raise ValueError("one label per rectangle required")
        if any(lab not in (Region.D1, Region.CORRIDOR, Region.RIGHT_PATCH) for lab in self.labels):
            raise ValueError("rectangle labels must be D1, CORRIDOR or RIGHT_PATCH")

    @classmethod
    def square(cls, L: float) -> "DomainSpec":
        """Square habitat [0,L] x [0,L]; the whole interior is D1, D2 is empty."""
        if not L > 0:
            raise ValueError(f"side length must be positive, got {L}")
        return cls(rects=(Rect(0.0, 0.0, L, L),), labels=(Region.D1,))

    @classmethod
    def ushape(cls, L2: float, Lx1: float, Lx2: float, Lx3: float, Ly: float) -> "DomainSpec":
        """U-shaped habitat: two patches of height L2 joined by a corridor of height Ly.

        Ly = L2 degenerates to the full rectangle [0, Lx1+Lx2+Lx3] x [0, L2].
        """
        for name, val in (("L2", L2), ("Lx1", Lx1), ("Lx2", Lx2), ("Lx3", Lx3), ("Ly", Ly)):
            if not val > 0:
                raise ValueError(f"{name} must be positive, got {val}")
        if Ly > L2:
            raise ValueError(f"corridor height Ly={Ly} cannot exceed patch height L2={L2}")
        return cls(
            rects=(
                Rect(0.0, 0.0, Lx1, L2),
                Rect(Lx1, 0.0, Lx1 + Lx2, Ly),
                Rect(Lx1 + Lx2, 0.0, Lx1 + Lx2 + Lx3, L2),
            ),
            labels=(Region.D1, Region.CORRIDOR, Region.RIGHT_PATCH),
        )

    @classmethod
    def rect_union(cls, rects: list[Rect] | tuple[Rect, ...], labels=None) -> "DomainSpec":
        """General rectangle union; without explicit labels the first rectangle
        is D1 and the remainder form D2 (second CORRIDOR, the rest RIGHT_PATCH)."""
        rects = tuple(rects)
        if labels is None:
            labels = tuple(
                Region.D1 if i == 0 else (Region.CORRIDOR if i == 1 else Region.RIGHT_PATCH)
                for i in range(len(rects))
            )
        return cls(rects=rects, labels=tuple(labels))


@dataclass(frozen=True)
class GridGeometry:
    """Rasterized habitat: cell-centered masked grid with per-cell region labels.

    mask and region_labels are (ny, nx) arrays indexed [iy, ix]; interior
    cells are enumerated in row-major order (iy outer, ix inner), the order
    used for flat state vectors, RNG draws and snapshot planes everywhere.
    """

    nx: int
    ny: int
    h: float
    mask: np.ndarray
    region_labels: np.ndarray

    @property
    def n_interior(self) -> int:
        return int(self.mask.sum())

    def flat_index(self) -> np.ndarray:
        """(ny, nx) int32 map from cell to its row-major interior position; -1 outside."""
        idx = np.full((self.ny, self.nx), -1, dtype=np.int32)
        idx[self.mask] = np.arange(self.n_interior, dtype=np.int32)
        return idx


def _snap(value: float, h: float) -> float:
    snapped = round(value / h) * h
    if abs(snapped - value) > 0.5 * h + 1e-12:
        raise ConfigError(f"coordinate {value} is further than h/2 from a multiple of h={h}")
    return snapped


def rasterize(spec: DomainSpec, h: float) -> GridGeometry:
    """Rasterize a domain onto a cell-centered grid of spacing h.

    Rectangle coordinates are snapped to the nearest multiple of h first; a
    rectangle that collapses under snapping raises DegenerateDomain, and a
    mask that is not 4-connected raises DisconnectedDomain.  When rectangles
    overlap, the first listed rectangle containing a cell center decides the
    cell's label.
    """
    if not h > 0:
        raise ValueError(f"grid spacing must be positive, got {h}")
    snapped = []
    for rect in spec.rects:
        ix0, iy0 = round(_snap(rect.x0, h) / h), round(_snap(rect.y0, h) / h)
        ix1, iy1 = round(_snap(rect.x1, h) / h), round(_snap(rect.y1, h) / h)
        if ix1 <= ix0 or iy1 <= iy0:
            raise DegenerateDomain(f"rectangle {rect} collapses at spacing h={h}")
        snapped.append((ix0, iy0, ix1, iy1))
    nx = max(s[2] for s in snapped)
    ny = max(s[3] for s in snapped)
    mask = np.zeros((ny, nx), dtype=bool)
    labels = np.full((ny, nx), int(Region.OUTSIDE), dtype=np.int8)
    # reversed order so earlier rectangles override later ones on overlap
    for (ix0, iy0, ix1, iy1), label in reversed(list(zip(snapped, spec.labels))):
        mask[iy0:iy1, ix0:ix1] = True
        labels[iy0:iy1, ix0:ix1] = int(label)
    _, n_components = ndimage.label(mask, structure=_FOUR_CONNECTED)
    if n_components != 1:
        raise DisconnectedDomain(f"mask splits into {n_components} components; the habitat must be connected")
    return GridGeometry(nx=nx, ny=ny, h=h, mask=mask, region_labels=labels)


def region_cells(g: GridGeometry, region: Region) -> np.ndarray:
    """Boolean (ny, nx) membership mask for a region label or composite query."""
    if region == Region.ALL:
        return g.mask.copy()
    if region == Region.D2:
        return (g.region_labels == int(Region.CORRIDOR)) | (g.region_labels == int(Region.RIGHT_PATCH))
    if region == Region.OUTSIDE:
        return ~g.mask
    return g.region_labels == int(region)


def region_flat_mask(g: GridGeometry, region: Region) -> np.ndarray:
    """Region membership restricted to interior cells, in row-major flat order."""
    return region_cells(g, region)[g.mask]


def boundary_stencil_info(g: GridGeometry) -> np.ndarray:
    """(n_interior, 4) flat neighbor indices in order north, south, east, west.

    A neighbor outside the mask is recorded as the center cell itself
    (mirror ghost), which realizes the homogeneous zero-flux condition.
    """
    idx = g.flat_index()
    iy, ix = np.nonzero(g.mask)
    own = idx[iy, ix]
    neighbors = np.empty((own.size, 4), dtype=np.int32)
    for col, (dy, dx) in enumerate(((1, 0), (-1, 0), (0, 1), (0, -1))):
        ny_, nx_ = iy + dy, ix + dx
        valid = (ny_ >= 0) & (ny_ < g.ny) & (nx_ >= 0) & (nx_ < g.nx)
        cand = np.where(valid, idx[ny_ % g.ny, nx_ % g.nx], -1)
        neighbors[:, col] = np.where(cand >= 0, cand, own)
    return neighbors


def require_region_nonempty(g: GridGeometry, region: Region) -> np.ndarray:
    """region_flat_mask that raises EmptyRegion instead of returning no cells."""
    flat = region_flat_mask(g, region)
    if not flat.any():
        raise EmptyRegion(f"region {region.name} holds no cells in this geometry")
    return flat
