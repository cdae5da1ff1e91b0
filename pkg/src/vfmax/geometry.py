"""Oriented rectangles, Bourgain rectangles, populations ``V(R)`` and rasters.

Discrete sets are boolean masks over a uniform cell grid; a cell belongs to a
set when its *centre* does.  All measures of sets derived from masks are cell
counts times ``h**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .angular import DEFAULT_NT, angular_profiles
from .field import FieldSpec

__all__ = [
    "RasterGrid",
    "RasterMask",
    "OrientedRect",
    "BourgainRect",
    "UndefinedDirectionError",
    "dilate",
    "rect_predicates",
    "rasterize",
    "line_angle",
    "axis_angle",
    "population",
    "bourgain_rectangle",
    "OmegaPartition",
    "omega_partition",
    "omega_prime",
]


class UndefinedDirectionError(ValueError):
    """The field vanishes at the base point, so no long axis is defined."""


@dataclass(frozen=True)
class RasterGrid:
    """Uniform cell grid: cell ``(i, j)`` has centre ``origin + ((j + 1/2) h, (i + 1/2) h)``."""

    origin: tuple[float, float]
    spacing: float
    shape: tuple[int, int]  # (ny, nx)

    def __post_init__(self):
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "shape", (int(self.shape[0]), int(self.shape[1])))
        if not self.spacing > 0 or min(self.shape) < 1:
            raise ValueError(f"invalid grid {self}")

    @classmethod
    def covering(cls, box, n: int) -> "RasterGrid":
        """``n`` cells across the x-extent of ``box = (xmin, xmax, ymin, ymax)``."""
        xmin, xmax, ymin, ymax = box
        h = (xmax - xmin) / n
        ny = int(math.ceil((ymax - ymin) / h - 1e-9))
        return cls((xmin, ymin), h, (ny, n))

    @property
    def h(self) -> float:
        return self.spacing

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    def centers(self) -> np.ndarray:
        """Array of shape ``(ny, nx, 2)`` with all cell centres."""
        ny, nx = self.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.spacing
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.spacing
        X, Y = np.meshgrid(xs, ys)
        return np.stack([X, Y], axis=-1)

    def center_of(self, i, j) -> np.ndarray:
        i = np.asarray(i)
        j = np.asarray(j)
        return np.stack(
            [self.origin[0] + (j + 0.5) * self.spacing, self.origin[1] + (i + 0.5) * self.spacing], axis=-1
        )

    def extent(self) -> tuple[float, float, float, float]:
        ny, nx = self.shape
        x0, y0 = self.origin
        return (x0, x0 + nx * self.spacing, y0, y0 + ny * self.spacing)

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "spacing": self.spacing, "shape": list(self.shape)}


@dataclass(frozen=True, eq=False)
class RasterMask:
    """A set of grid cells.  ``excluded`` counts cells dropped by a builder (diagnostics)."""

    grid: RasterGrid
    cells: np.ndarray
    excluded: int = 0

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        if cells.shape != self.grid.shape:
            raise ValueError(f"mask shape {cells.shape} does not match grid {self.grid.shape}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    def __eq__(self, other):
        # set equality; the diagnostics tally is not part of the set
        if not isinstance(other, RasterMask):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.cells, other.cells)

    __hash__ = None

    @classmethod
    def empty(cls, grid: RasterGrid) -> "RasterMask":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.cells))

    @property
    def measure(self) -> float:
        return self.count * self.grid.cell_area

    def _same_grid(self, other: "RasterMask"):
        if other.grid != self.grid:
            raise ValueError("set algebra needs masks on the same grid")

    def __or__(self, other):
        self._same_grid(other)
        return RasterMask(self.grid, self.cells | other.cells)

    def __and__(self, other):
        self._same_grid(other)
        return RasterMask(self.grid, self.cells & other.cells)

    def __sub__(self, other):
        self._same_grid(other)
        return RasterMask(self.grid, self.cells & ~other.cells)

    union = __or__
    intersection = __and__
    difference = __sub__

    def issubset(self, other) -> bool:
        self._same_grid(other)
        return not np.any(self.cells & ~other.cells)

    def isdisjoint(self, other) -> bool:
        self._same_grid(other)
        return not np.any(self.cells & other.cells)

    def indices(self) -> np.ndarray:
        """Row-major ``(row, col)`` pairs of member cells."""
        return np.argwhere(self.cells)

    def to_csv(self, path) -> None:
        """Write ``row,col`` pairs after a one-line grid-spec comment."""
        g = self.grid
        lines = [
            f"# vfmax-mask/1 origin_x={g.origin[0]!r} origin_y={g.origin[1]!r} "
            f"spacing={g.spacing!r} ny={g.shape[0]} nx={g.shape[1]}",
            "row,col",
        ]
        lines += [f"{r},{c}" for r, c in self.indices()]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "RasterMask":
        text = Path(path).read_text().splitlines()
        head = text[0]
        if not head.startswith("# vfmax-mask/1"):
            raise ValueError(f"{path}: not a vfmax mask file")
        kv = dict(tok.split("=") for tok in head.split()[2:])
        grid = RasterGrid(
            (float(kv["origin_x"]), float(kv["origin_y"])), float(kv["spacing"]), (int(kv["ny"]), int(kv["nx"]))
        )
        cells = np.zeros(grid.shape, dtype=bool)
        for line in text[2:]:
            if line:
                r, c = line.split(",")
                cells[int(r), int(c)] = True
        return cls(grid, cells)


@dataclass(frozen=True)
class OrientedRect:
    """Closed rectangle with long axis at angle ``alpha`` (mod pi), length ``L``, width ``W``."""

    center: tuple[float, float]
    alpha: float
    L: float
    W: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "alpha", float(self.alpha) % math.pi)
        if not (self.L > 0 and self.W > 0):
            raise ValueError(f"rectangle sides must be positive, got L={self.L}, W={self.W}")
        if self.W > self.L:
            raise ValueError(f"width {self.W} exceeds length {self.L}")

    @property
    def axis(self) -> np.ndarray:
        return np.array([math.cos(self.alpha), math.sin(self.alpha)])

    @property
    def normal(self) -> np.ndarray:
        return np.array([-math.sin(self.alpha), math.cos(self.alpha)])

    @property
    def area(self) -> float:
        return self.L * self.W

    @property
    def eccentricity(self) -> float:
        return self.W / self.L

    def corners(self) -> np.ndarray:
        """Corners in counter-clockwise order, shape ``(4, 2)``."""
        c = np.array(self.center)
        a = 0.5 * self.L * self.axis
        n = 0.5 * self.W * self.normal
        return np.array([c - a - n, c + a - n, c + a + n, c - a + n])

    def local(self, points) -> np.ndarray:
        """Coordinates ``(along axis, along normal)`` relative to the centre."""
        d = np.asarray(points, dtype=float) - np.array(self.center)
        ca, sa = math.cos(self.alpha), math.sin(self.alpha)
        return np.stack([d[..., 0] * ca + d[..., 1] * sa, -d[..., 0] * sa + d[..., 1] * ca], axis=-1)

    def contains(self, points) -> np.ndarray:
        loc = self.local(points)
        return (np.abs(loc[..., 0]) <= 0.5 * self.L) & (np.abs(loc[..., 1]) <= 0.5 * self.W)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "alpha": self.alpha, "L": self.L, "W": self.W}


def dilate(rect: OrientedRect, factor: float) -> OrientedRect:
    """Same centre and orientation, both sides scaled by ``factor >= 1``."""
    if factor < 1:
        raise ValueError("dilation factor must be >= 1")
    return OrientedRect(rect.center, rect.alpha, rect.L * factor, rect.W * factor)


class RectPredicates(NamedTuple):
    contains_point: bool
    a_contains_b: bool
    a_intersects_b: bool


def _sat_intersects(a: OrientedRect, b: OrientedRect) -> bool:
    ca = a.corners()
    cb = b.corners()
    for axis in (a.axis, a.normal, b.axis, b.normal):
        pa = ca @ axis
        pb = cb @ axis
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


def rect_predicates(a: OrientedRect, b: OrientedRect, p) -> RectPredicates:
    """Point containment, rectangle containment (corner test) and intersection (separating axes)."""
    return RectPredicates(
        bool(a.contains(p)),
        bool(np.all(a.contains(b.corners()))),
        _sat_intersects(a, b),
    )


def _candidate_cells(rect: OrientedRect, grid: RasterGrid):
    """Cells that may have their centre in ``rect``.

    Samples the rectangle (padded by one cell) on a local lattice of step
    ``h/2``; every cell whose centre lies in the rectangle contains one of the
    samples, so the exact centre test afterwards loses nothing.
    """
    h = grid.spacing
    step = 0.5 * h
    nu = int(math.ceil((rect.L + 2 * h) / step)) + 1
    nv = int(math.ceil((rect.W + 2 * h) / step)) + 1
    u = np.linspace(-0.5 * rect.L - h, 0.5 * rect.L + h, nu)
    v = np.linspace(-0.5 * rect.W - h, 0.5 * rect.W + h, nv)
    U, V = np.meshgrid(u, v)
    pts = np.array(rect.center) + U[..., None] * rect.axis + V[..., None] * rect.normal
    j = np.floor((pts[..., 0] - grid.origin[0]) / h).astype(np.int64).ravel()
    i = np.floor((pts[..., 1] - grid.origin[1]) / h).astype(np.int64).ravel()
    ny, nx = grid.shape
    ok = (i >= 0) & (i < ny) & (j >= 0) & (j < nx)
    flat = np.unique(i[ok] * nx + j[ok])
    return flat // nx, flat % nx


def rasterize(rect: OrientedRect, grid: RasterGrid) -> RasterMask:
    """Cells of ``grid`` whose centres lie in the closed rectangle (clipped to the grid)."""
    i, j = _candidate_cells(rect, grid)
    inside = rect.contains(grid.center_of(i, j))
    cells = np.zeros(grid.shape, dtype=bool)
    cells[i[inside], j[inside]] = True
    return RasterMask(grid, cells)


def line_angle(v, axis) -> np.ndarray:
    """Unsigned angle in ``[0, pi/2]`` between the lines spanned by ``v`` and ``axis``."""
    v = np.asarray(v, dtype=float)
    axis = np.asarray(axis, dtype=float)
    cross = v[..., 0] * axis[..., 1] - v[..., 1] * axis[..., 0]
    dot = v[..., 0] * axis[..., 0] + v[..., 1] * axis[..., 1]
    return np.arctan2(np.abs(cross), np.abs(dot))


def axis_angle(alpha0: float, alpha1: float) -> float:
    """Angle between two undirected axes given by their angles mod pi."""
    d = abs(alpha0 - alpha1) % math.pi
    return min(d, math.pi - d)


def population(field: FieldSpec, rect: OrientedRect, grid: RasterGrid) -> RasterMask:
    """Raster of ``V(R)``: cells of ``R`` where ``v`` is within ``W/(2L)`` of the long axis.

    Cells where ``v = 0`` are dropped and tallied in ``excluded``.  Parts of
    ``R`` outside the grid are ignored.
    """
    if not rect.W < rect.L:
        raise ValueError("population needs W/L < 1")
    i, j = _candidate_cells(rect, grid)
    pts = grid.center_of(i, j)
    inside = rect.contains(pts)
    i, j, pts = i[inside], j[inside], pts[inside]
    v = field.evaluate(pts) if len(pts) else np.zeros((0, 2))
    zero = (v[:, 0] == 0) & (v[:, 1] == 0)
    keep = ~zero & (line_angle(v, rect.axis) < rect.W / (2.0 * rect.L))
    cells = np.zeros(grid.shape, dtype=bool)
    cells[i[keep], j[keep]] = True
    return RasterMask(grid, cells, excluded=int(np.count_nonzero(zero)))


@dataclass(frozen=True)
class BourgainRect:
    """Rectangle centred at ``base`` along ``v(base)``: length ``2 eps |v|``, half-width ``delta``."""

    base: tuple[float, float]
    eps: float
    direction: tuple[float, float]
    L: float
    delta: float
    degenerate: bool

    @property
    def rect(self) -> OrientedRect:
        """The rectangle as an :class:`OrientedRect` (full width ``2 delta``)."""
        if self.degenerate:
            raise ValueError("degenerate Bourgain rectangle has no width")
        alpha = math.atan2(self.direction[1], self.direction[0])
        W = 2.0 * self.delta
        if W <= self.L:
            return OrientedRect(self.base, alpha, self.L, W)
        # wider than long: same set, described with the other axis as the long one
        return OrientedRect(self.base, alpha + 0.5 * math.pi, W, self.L)


def _bourgain_from(x, eps, v, sup_w) -> BourgainRect:
    vn = float(math.hypot(v[0], v[1]))
    if vn == 0:
        raise UndefinedDirectionError(f"v vanishes at {tuple(x)}")
    return BourgainRect(
        (float(x[0]), float(x[1])),
        float(eps),
        (float(v[0]) / vn, float(v[1]) / vn),
        2.0 * eps * vn,
        eps * sup_w / vn,
        sup_w == 0,
    )


def bourgain_rectangle(field: FieldSpec, x, eps: float, n_t: int = DEFAULT_NT) -> BourgainRect:
    """Bourgain's rectangle ``R_{x, eps}`` from the sampled angular profile."""
    v = field.evaluate(np.asarray(x, dtype=float))
    if v[0] == 0 and v[1] == 0:
        raise UndefinedDirectionError(f"v vanishes at {tuple(x)}")
    prof = angular_profiles(field, [x], eps, n_t)[0]
    return _bourgain_from(x, eps, prof.v_at_x, prof.sup_w)


@dataclass(eq=False)
class OmegaPartition:
    """Cells of ``Omega`` binned by the dyadic band of their Bourgain half-width."""

    grid: RasterGrid
    eps: float
    bins: dict
    degenerate: RasterMask
    delta: np.ndarray  # nan outside Omega and at degenerate cells
    s_index: np.ndarray  # bin label per cell; a large negative sentinel where unassigned
    v: np.ndarray = dc_field(repr=False)

    UNASSIGNED = np.iinfo(np.int64).min

    def domain_mask(self) -> RasterMask:
        return RasterMask(self.grid, (self.s_index != self.UNASSIGNED) | self.degenerate.cells)


def _dyadic_band(delta: np.ndarray) -> np.ndarray:
    # delta = m 2**e with m in [1/2, 1)  <=>  2**(e-1) <= delta < 2**e  <=>  s = -e
    _, e = np.frexp(delta)
    return -e.astype(np.int64)


def omega_partition(
    field: FieldSpec, eps: float, grid: RasterGrid, n_t: int = DEFAULT_NT, chunk: int = 512
) -> OmegaPartition:
    """Split the cells of ``Omega`` into the bins ``2**(-s-1) <= delta < 2**(-s)``."""
    centers = grid.centers()
    in_dom = field.contains(centers, padded=False)
    idx = np.argwhere(in_dom)
    pts = centers[in_dom]
    sup = np.empty(len(pts))
    vv = np.empty((len(pts), 2))
    for k in range(0, len(pts), chunk):
        profs = angular_profiles(field, pts[k : k + chunk], eps, n_t)
        sup[k : k + chunk] = [p.sup_w for p in profs]
        vv[k : k + chunk] = [p.v_at_x for p in profs]
    vn = np.hypot(vv[:, 0], vv[:, 1])
    good = (vn > 0) & (sup > 0)
    delta = np.full(grid.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = eps * sup / vn
    delta[idx[good, 0], idx[good, 1]] = d[good]
    s_index = np.full(grid.shape, OmegaPartition.UNASSIGNED, dtype=np.int64)
    s_index[idx[good, 0], idx[good, 1]] = _dyadic_band(d[good])
    degenerate = np.zeros(grid.shape, dtype=bool)
    degenerate[idx[~good, 0], idx[~good, 1]] = True
    bins = {int(s): RasterMask(grid, s_index == s) for s in np.unique(s_index[s_index != OmegaPartition.UNASSIGNED])}
    v_full = np.full(grid.shape + (2,), np.nan)
    v_full[idx[:, 0], idx[:, 1]] = vv
    return OmegaPartition(grid, float(eps), bins, RasterMask(grid, degenerate), delta, s_index, v_full)


def omega_prime(
    field: FieldSpec,
    eps: float,
    s: int,
    grid: RasterGrid,
    n_t: int = DEFAULT_NT,
    partition: OmegaPartition | None = None,
) -> RasterMask:
    """Union of the rasterised doubled Bourgain rectangles over the cells of bin ``s``.

    Pass a precomputed ``partition`` (same field, ``eps`` and grid) to skip
    recomputing the angular profiles.
    """
    if partition is None:
        partition = omega_partition(field, eps, grid, n_t)
    if s not in partition.bins:
        raise KeyError(f"bin s={s} is empty")
    cells = np.zeros(grid.shape, dtype=bool)
    for i, j in partition.bins[s].indices():
        x = grid.center_of(i, j)
        v = partition.v[i, j]
        vn = math.hypot(v[0], v[1])
        br = BourgainRect(
            (x[0], x[1]), partition.eps, (v[0] / vn, v[1] / vn), 2 * partition.eps * vn, partition.delta[i, j], False
        )
        cells |= rasterize(dilate(br.rect, 2.0), grid).cells
    return RasterMask(grid, cells)
