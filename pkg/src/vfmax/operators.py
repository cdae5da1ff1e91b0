"""Averages and maximal operators along a vector field, plus Littlewood-Paley tools.

``average_A`` keeps the normalisation ``1/eps`` over an interval of length
``2 eps``, so ``A_eps 1 = 2``.  Functions live on cell-centred grids and are
extended by zero outside them.
"""
from __future__ import annotations

import logging
import math
import struct
import warnings
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .angular import DEFAULT_NT, ExpLog, LogPoly, bound_factor
from .errors import DivergentSeriesError, RegimeError
from .field import FieldSpec
from .geometry import (
    BourgainRect,
    OrientedRect,
    RasterGrid,
    RasterMask,
    dilate,
    population,
    rasterize,
)

log = logging.getLogger(__name__)

__all__ = [
    "GridFunction",
    "UnsupportedSizeError",
    "average_A",
    "maximal_Mv",
    "Candidate",
    "CandidateFamily",
    "build_family",
    "laceyli_maximal",
    "tilde_maximal",
    "weak_type_ratio",
    "weak_type_curve",
    "frequency_labels",
    "BandDecomposition",
    "lp_decompose",
    "frequency_bump",
    "mollified_cutoff",
    "SingleScaleRecord",
    "single_scale_audit",
    "ScaleSumRecord",
    "scale_sum_audit",
    "exact_sum",
]

_MAGIC = b"VFGF"


class UnsupportedSizeError(ValueError):
    """The grid is not square with a power-of-two side."""


def exact_sum(values) -> Fraction:
    """Exact rational sum of finite floating-point values."""
    vals = np.asarray(values, dtype=float).ravel()
    # every double is m * 2**(e - 53) with integer m, so group by exponent
    m, e = np.frexp(vals)
    mant = (m * 2.0**53).astype(np.int64)
    total = Fraction(0)
    for ex in np.unique(e):
        s = int(mant[e == ex].astype(object).sum())
        total += Fraction(s) * Fraction(2) ** (int(ex) - 53)
    return total


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values on the cells of a :class:`RasterGrid`."""

    grid: RasterGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: RasterGrid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_callable(cls, grid: RasterGrid, func) -> "GridFunction":
        c = grid.centers()
        return cls(grid, func(c[..., 0], c[..., 1]))

    @classmethod
    def indicator(cls, mask: RasterMask) -> "GridFunction":
        return cls(mask.grid, mask.cells.astype(float))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    @property
    def area(self) -> float:
        ny, nx = self.grid.shape
        return ny * nx * self.grid.cell_area

    def norm1(self) -> float:
        return self.grid.cell_area * math.fsum(np.abs(self.values).ravel())

    def norm2(self) -> float:
        return math.sqrt(self.grid.cell_area * math.fsum((self.values**2).ravel()))

    def norm_inf(self) -> float:
        return float(np.abs(self.values).max())

    def interpolate(self, points) -> np.ndarray:
        """Bilinear interpolation between cell centres, zero outside the grid."""
        pts = np.asarray(points, dtype=float)
        g = self.grid
        coords = np.stack(
            [(pts[..., 1] - g.origin[1]) / g.spacing - 0.5, (pts[..., 0] - g.origin[0]) / g.spacing - 0.5]
        ).reshape(2, -1)
        out = ndimage.map_coordinates(self.values, coords, order=1, mode="grid-constant", cval=0.0)
        return out.reshape(pts.shape[:-1])

    # I/O
    def to_csv(self, path) -> None:
        g = self.grid
        lines = [
            f"# vfmax-gridfunction/1 origin_x={float(g.origin[0])!r} origin_y={float(g.origin[1])!r} "
            f"spacing={float(g.spacing)!r} ny={g.shape[0]} nx={g.shape[1]}",
            "row,col,value",
        ]
        ny, nx = g.shape
        for r in range(ny):
            for c in range(nx):
                lines.append(f"{r},{c},{float(self.values[r, c])!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        text = Path(path).read_text().splitlines()
        if not text[0].startswith("# vfmax-gridfunction/1"):
            raise ValueError(f"{path}: not a vfmax grid-function file")
        kv = dict(tok.split("=") for tok in text[0].split()[2:])
        grid = RasterGrid(
            (float(kv["origin_x"]), float(kv["origin_y"])), float(kv["spacing"]), (int(kv["ny"]), int(kv["nx"]))
        )
        vals = np.zeros(grid.shape)
        for line in text[2:]:
            if line:
                r, c, v = line.split(",")
                vals[int(r), int(c)] = float(v)
        return cls(grid, vals)

    def to_bytes(self) -> bytes:
        """``VFGF``, u32 n, f64 origin x, f64 origin y, f64 spacing, then n*n f64 row-major (little-endian)."""
        ny, nx = self.grid.shape
        if ny != nx:
            raise UnsupportedSizeError("binary layout needs a square grid")
        head = _MAGIC + struct.pack("<I3d", nx, self.grid.origin[0], self.grid.origin[1], self.grid.spacing)
        return head + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridFunction":
        if data[:4] != _MAGIC:
            raise ValueError("bad magic, expected VFGF")
        n, ox, oy, h = struct.unpack_from("<I3d", data, 4)
        off = 4 + struct.calcsize("<I3d")
        vals = np.frombuffer(data, dtype="<f8", count=n * n, offset=off).reshape(n, n)
        return cls(RasterGrid((ox, oy), h, (n, n)), vals)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "GridFunction":
        return cls.from_bytes(Path(path).read_bytes())


# ----------------------------------------------------------------------------
# averages along the field


def _segment_averages(field: FieldSpec, f: GridFunction, xs: np.ndarray, eps: float, n_t: int) -> np.ndarray:
    xs = np.asarray(xs, dtype=float).reshape(-1, 2)
    t = np.linspace(-eps, eps, n_t + 1)
    v = field.evaluate(xs)
    pts = xs[:, None, :] + t[None, :, None] * v[:, None, :]
    vals = f.interpolate(pts)
    return np.trapezoid(vals, t, axis=1) / eps


def average_A(field: FieldSpec, f: GridFunction, x, eps: float, n_t: int = DEFAULT_NT) -> float:
    """``(1/eps) * integral over [-eps, eps] of f(x + t v(x)) dt`` by the composite trapezoid rule."""
    return float(_segment_averages(field, f, np.asarray(x, dtype=float), eps, n_t)[0])


def maximal_Mv(
    field: FieldSpec,
    f: GridFunction,
    eps_set: Sequence[float],
    n_t: int = 256,
    chunk: int = 4096,
    row_range: tuple[int, int] | None = None,
) -> GridFunction:
    """``sup |A_eps f|`` over ``eps_set`` at every cell centre of ``Omega`` (zero elsewhere).

    ``row_range = (r0, r1)`` restricts the work to grid rows ``r0 <= i < r1``;
    each value depends only on its own cell, so row blocks can be computed
    independently and pasted together.
    """
    eps_set = sorted(set(float(e) for e in eps_set))
    if not eps_set:
        raise ValueError("eps_set must be nonempty")
    g = f.grid
    centers = g.centers()
    inside = field.contains(centers, padded=False)
    if row_range is not None:
        rows = np.zeros(g.shape[0], dtype=bool)
        rows[row_range[0] : row_range[1]] = True
        inside &= rows[:, None]
    pts = centers[inside]
    best = np.zeros(len(pts))
    for eps in eps_set:
        for k in range(0, len(pts), chunk):
            a = np.abs(_segment_averages(field, f, pts[k : k + chunk], eps, n_t))
            np.maximum(best[k : k + chunk], a, out=best[k : k + chunk])
    out = np.zeros(g.shape)
    out[inside] = best
    return GridFunction(g, out)


# ----------------------------------------------------------------------------
# rectangle families


@dataclass(frozen=True, eq=False)
class Candidate:
    """One enumerated rectangle with its rasters and admissibility verdict."""

    rect: OrientedRect
    r_mask: RasterMask
    v_mask: RasterMask
    admissible: bool

    @property
    def v_measure(self) -> float:
        return self.v_mask.measure


@dataclass(eq=False)
class CandidateFamily:
    """Finite, reproducible family of rectangles for a maximal operator.

    ``width_rule`` is ``"theta"`` (``theta <= W/L < 2 theta``) or ``"w"``
    (``w <= W < 2w`` with the length and width caps).
    """

    grid: RasterGrid
    width_rule: str
    delta: float
    members: list
    config: dict = dc_field(default_factory=dict)

    @property
    def admissible(self) -> list:
        return [m for m in self.members if m.admissible]

    def __len__(self):
        return len(self.members)

    def extended(self, extra: "CandidateFamily") -> "CandidateFamily":
        if extra.grid != self.grid or extra.width_rule != self.width_rule or extra.delta != self.delta:
            raise ValueError("families differ in grid, width rule or delta")
        return CandidateFamily(self.grid, self.width_rule, self.delta, self.members + extra.members, self.config)


def density_ok(v_count: int, cell_area: float, L: float, W: float, delta: float) -> bool:
    """Exact rational test of ``|V| >= delta * L * W`` with ``|V| = count * h**2``."""
    return v_count > 0 and Fraction(v_count) * Fraction(cell_area) >= Fraction(delta) * Fraction(L) * Fraction(W)


def build_family(
    field: FieldSpec,
    grid: RasterGrid,
    *,
    delta: float,
    theta: float | None = None,
    w: float | None = None,
    stride: int = 16,
    n_alpha: int = 8,
    lengths: Sequence[float] | None = None,
    width_factors: Sequence[float] = (1.0, 1.5),
    B: float | None = None,
    min_width_cells: float = 1.5,
    max_members: int | None = None,
    seed: int = 0,
    centers=None,
    aligned: bool = False,
) -> CandidateFamily:
    """Enumerate rectangles on a centre sub-grid.

    Centres are cell centres on a ``stride`` sub-grid shifted by a seeded
    offset; orientations are ``k pi / n_alpha``; lengths default to the dyadic
    values between ``8h`` and the grid side.  With ``theta`` the widths are
    ``factor * theta * L``; with ``w`` they are ``factor * w`` and the caps
    ``L < 1/(100 B)``, ``W < B/100`` apply when ``B`` is given.  Widths below
    ``min_width_cells`` cells are skipped.  ``centers`` (an array of points)
    is added to the sub-grid centres; ``aligned`` adds the direction of the
    field at each centre to the orientation set.
    """
    if (theta is None) == (w is None):
        raise ValueError("give exactly one of theta or w")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if theta is not None and not 0 < theta < 0.01:
        raise RegimeError("theta must lie in (0, 1/100)")
    if any(not 1 <= c < 2 for c in width_factors):
        raise ValueError("width factors must lie in [1, 2)")
    h = grid.spacing
    ny, nx = grid.shape
    side = min(nx, ny) * h
    if lengths is None:
        lengths = [h * 2**k for k in range(3, 32) if h * 2**k <= side]
    rng = np.random.default_rng(seed)
    oi, oj = rng.integers(0, stride, size=2)
    ii, jj = np.meshgrid(np.arange(int(oi), ny, stride), np.arange(int(oj), nx, stride), indexing="ij")
    pts = grid.center_of(ii.ravel(), jj.ravel())
    if centers is not None:
        pts = np.concatenate([pts, np.asarray(centers, dtype=float).reshape(-1, 2)])
    members = []
    for c in pts:
        alphas = [k * math.pi / n_alpha for k in range(n_alpha)]
        if aligned:
            v = field.evaluate(c)
            if v[0] != 0 or v[1] != 0:
                alphas.append(math.atan2(v[1], v[0]) % math.pi)
        for alpha in alphas:
            for L in lengths:
                for fac in width_factors:
                    W = fac * (theta * L if theta is not None else w)
                    if W < min_width_cells * h or W >= L:
                        continue
                    if B is not None and w is not None and not (L < 1 / (100 * B) and W < B / 100):
                        continue
                    rect = OrientedRect((c[0], c[1]), alpha, L, W)
                    r_mask = rasterize(rect, grid)
                    if r_mask.count == 0:
                        continue
                    v_mask = population(field, rect, grid)
                    ok = density_ok(v_mask.count, grid.cell_area, L, W, delta)
                    members.append(Candidate(rect, r_mask, v_mask, ok))
                    if max_members is not None and len(members) >= max_members:
                        return _family(grid, theta, w, delta, members, locals())
    return _family(grid, theta, w, delta, members, locals())


def _family(grid, theta, w, delta, members, scope):
    cfg = {
        k: scope[k]
        for k in ("theta", "w", "delta", "stride", "n_alpha", "B", "seed", "min_width_cells", "aligned")
        if k in scope
    }
    cfg["lengths"] = [float(x) for x in scope["lengths"]]
    cfg["width_factors"] = [float(x) for x in scope["width_factors"]]
    return CandidateFamily(grid, "theta" if theta is not None else "w", float(delta), members, cfg)


def _sup_of_means(f: GridFunction, masks: Sequence[RasterMask]) -> np.ndarray:
    absf = np.abs(f.values)
    out = np.zeros(f.grid.shape)
    for m in masks:
        cnt = m.count
        if cnt == 0:
            continue
        mean = math.fsum(absf[m.cells]) / cnt
        np.maximum(out, np.where(m.cells, mean, 0.0), out=out)
    return out


def laceyli_maximal(f: GridFunction, family: CandidateFamily) -> GridFunction:
    """``sup chi_R * mean_R |f|`` over admissible members of a ``w``-class family."""
    if family.width_rule != "w":
        raise ValueError("laceyli_maximal needs a w-class family")
    adm = family.admissible
    if not adm:
        warnings.warn("no admissible rectangles; returning zero", RuntimeWarning, stacklevel=2)
    return GridFunction(f.grid, _sup_of_means(f, [m.r_mask for m in adm]))


def tilde_maximal(f: GridFunction, family: CandidateFamily) -> GridFunction:
    """``sup chi_V(R) * mean_V(R) |f|`` over admissible members of a ``theta``-class family."""
    if family.width_rule != "theta":
        raise ValueError("tilde_maximal needs a theta-class family")
    adm = family.admissible
    if not adm:
        warnings.warn("no admissible rectangles; returning zero", RuntimeWarning, stacklevel=2)
    return GridFunction(f.grid, _sup_of_means(f, [m.v_mask for m in adm]))


# ----------------------------------------------------------------------------
# weak type


@dataclass(frozen=True)
class WeakTypeCurve:
    lambdas: np.ndarray
    measures: np.ndarray
    ratios: np.ndarray
    norm1: float

    @property
    def ratio(self) -> float:
        return float(self.ratios.max()) if len(self.ratios) else 0.0


def weak_type_curve(Mf: GridFunction, f: GridFunction, lambda_grid=None) -> WeakTypeCurve:
    """``lambda * |{Mf > lambda}| / ||f||_1`` on a lambda grid.

    The default grid is the set of distinct values of ``Mf`` shrunk by one ulp
    (where the distribution function jumps) joined with 256 log-spaced points
    across the range of ``Mf``, so the maximum is attained on it.
    """
    n1 = f.norm1()
    if not n1 > 0:
        raise ValueError("weak-type ratio needs ||f||_1 > 0")
    vals = Mf.values.ravel()
    pos = vals[vals > 0]
    if len(pos) == 0:
        return WeakTypeCurve(np.zeros(0), np.zeros(0), np.zeros(0), n1)
    if lambda_grid is None:
        distinct = np.unique(pos)
        lambda_grid = np.union1d(
            np.nextafter(distinct, 0.0), np.geomspace(pos.min() * 0.5, pos.max(), 256)
        )
    lam = np.asarray(lambda_grid, dtype=float)
    srt = np.sort(vals)
    counts = len(srt) - np.searchsorted(srt, lam, side="right")
    meas = counts * Mf.grid.cell_area
    return WeakTypeCurve(lam, meas, lam * meas / n1, n1)


def weak_type_ratio(Mf: GridFunction, f: GridFunction, lambda_grid=None) -> float:
    """``max over lambda of lambda * |{Mf > lambda}| / ||f||_1``."""
    return weak_type_curve(Mf, f, lambda_grid).ratio


# ----------------------------------------------------------------------------
# Littlewood-Paley


def _check_square_pow2(grid: RasterGrid) -> int:
    ny, nx = grid.shape
    if ny != nx or nx < 2 or nx & (nx - 1):
        raise UnsupportedSizeError(f"grid {grid.shape} is not square with a power-of-two side")
    return nx


def _lattice_radius2(n: int) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    return k[:, None] ** 2 + k[None, :] ** 2


def frequency_labels(n: int) -> np.ndarray:
    """Band label of every lattice frequency: ``-1`` for the DC block, ``j`` for ``2**j <= |k| < 2**(j+1)``.

    Comparisons are done on integer squared radii, so the partition is exact.
    Frequencies with ``|k| >= n`` (lattice corners) go to the top band.
    """
    r2 = _lattice_radius2(n)
    labels = np.full(r2.shape, -1, dtype=np.int64)
    top = int(math.log2(n // 2))
    for j in range(top + 1):
        lo = 4**j
        hi = 4 ** (j + 1)
        sel = (r2 >= lo) & (r2 < hi) if j < top else (r2 >= lo)
        labels[sel] = j
    return labels


@dataclass(frozen=True, eq=False)
class BandDecomposition:
    """``f = dc_block + sum of bands``; band ``T`` has lattice frequencies ``T <= |k| < 2T``."""

    dc_block: GridFunction
    bands: list  # [(T, GridFunction)] with T = 1, 2, 4, ..., n/2
    energies: dict  # T -> ||f_T||_2**2 (and "dc"), computed on the frequency side

    def band(self, T: int) -> GridFunction:
        for t, g in self.bands:
            if t == T:
                return g
        return GridFunction.zeros(self.dc_block.grid)

    def reconstruct(self) -> GridFunction:
        total = self.dc_block.values.copy()
        for _, g in self.bands:
            total = total + g.values
        return self.dc_block.with_values(total)

    def physical_frequency(self, T: int) -> float:
        """Lattice band index ``T`` in cycles per unit length."""
        g = self.dc_block.grid
        return T / (g.shape[1] * g.spacing)


def lp_decompose(f: GridFunction) -> BandDecomposition:
    """Sharp dyadic annular decomposition on the discrete frequency lattice."""
    n = _check_square_pow2(f.grid)
    F = np.fft.fft2(f.values)
    labels = frequency_labels(n)
    scale = f.grid.cell_area / (n * n)
    power = np.abs(F) ** 2

    def piece(sel):
        return GridFunction(f.grid, np.fft.ifft2(np.where(sel, F, 0)).real)

    dc_sel = labels == -1
    energies = {"dc": scale * math.fsum(power[dc_sel])}
    bands = []
    for j in range(int(labels.max()) + 1):
        sel = labels == j
        T = 2**j
        bands.append((T, piece(sel)))
        energies[T] = scale * math.fsum(power[sel])
    return BandDecomposition(piece(dc_sel), bands, energies)


def frequency_bump(rho) -> np.ndarray:
    """Smooth radial bump supported in the unit disk with value 1 at the origin."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    inside = rho < 1
    r2 = rho[inside] ** 2
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2))
    return out


def mollified_cutoff(mask: RasterMask, T: float) -> GridFunction:
    """Periodic convolution of the mask with ``T**2 psi(T x)``, ``psi^`` = :func:`frequency_bump`.

    ``T`` is a physical frequency (cycles per unit length); the multiplier is
    ``bump(|xi| / T)`` so the output is band-limited to ``|xi| < T``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    n = _check_square_pow2(mask.grid)
    k = np.fft.fftfreq(n, d=mask.grid.spacing)
    xi = np.hypot(k[:, None], k[None, :])
    mult = frequency_bump(xi / T)
    out = np.fft.ifft2(np.fft.fft2(mask.cells.astype(float)) * mult).real
    return GridFunction(mask.grid, out)


# ----------------------------------------------------------------------------
# single-scale measurement and scale-sum scaffold


@dataclass(frozen=True)
class SingleScaleRecord:
    T: float
    delta: float
    Tdelta: float
    lhs: float
    factor: float
    rhs_core: float
    ratio: float
    skipped: bool = False

    def to_row(self) -> dict:
        return {k: getattr(self, k) for k in ("T", "delta", "Tdelta", "lhs", "factor", "rhs_core", "ratio", "skipped")}


def single_scale_audit(
    field: FieldSpec,
    f_T: GridFunction,
    rect: BourgainRect,
    T: float,
    regime: ExpLog | LogPoly = LogPoly(2.0),
    C: float = 1.0,
    n_t: int = 256,
) -> SingleScaleRecord:
    """Measure ``||A_eps f_T|_R||_2`` against ``factor * ||f_T (chi_R' * psi_1/T)||_2``.

    Nothing is asserted: the comparison constant is not known.  ``T`` is a
    physical frequency.
    """
    if rect.degenerate:
        log.info("single-scale audit skipped: degenerate rectangle at %s", rect.base)
        nan = float("nan")
        return SingleScaleRecord(float(T), 0.0, 0.0, nan, nan, nan, nan, True)
    Td = T * rect.delta
    if not Td > 1:
        raise RegimeError(f"T*delta = {Td} must exceed 1")
    R = rect.rect
    grid = f_T.grid
    r_mask = rasterize(R, grid)
    idx = r_mask.indices()
    if len(idx):
        pts = grid.center_of(idx[:, 0], idx[:, 1])
        a = _segment_averages(field, f_T, pts, rect.eps, n_t)
        lhs = math.sqrt(grid.cell_area * math.fsum(a**2))
    else:
        lhs = 0.0
    cutoff = mollified_cutoff(rasterize(dilate(R, 2.0), grid), T)
    rhs_core = math.sqrt(grid.cell_area * math.fsum(((f_T.values * cutoff.values) ** 2).ravel()))
    factor = bound_factor(regime, Td, C)
    denom = factor * rhs_core
    ratio = 0.0 if lhs == 0 else (lhs / denom if denom > 0 else float("inf"))
    return SingleScaleRecord(float(T), rect.delta, Td, lhs, factor, rhs_core, ratio)


@dataclass(frozen=True)
class ScaleSumRecord:
    weights: dict  # j -> weight
    per_j: dict  # j -> sum over s of ||f_{2^(s+j)}||^2
    lhs: float
    constant: float
    norm2_sq: float
    bound: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "weights": {str(k): v for k, v in self.weights.items()},
            "per_j": {str(k): v for k, v in self.per_j.items()},
            "lhs": self.lhs,
            "constant": self.constant,
            "norm2_sq": self.norm2_sq,
            "bound": self.bound,
            "passed": self.passed,
        }


def _weight(kind, j: int) -> float:
    if isinstance(kind, LogPoly):
        return float(j) ** (-kind.p)
    if isinstance(kind, ExpLog):
        return math.exp(-kind.sigma * float(j) ** kind.c1)
    raise TypeError(f"unsupported weight kind {kind!r}")


def scale_sum_audit(
    f: GridFunction,
    kind: LogPoly | ExpLog,
    j_range: Sequence[int],
    s_range: Sequence[int],
    decomposition: BandDecomposition | None = None,
) -> ScaleSumRecord:
    """Check ``sum_j weight(j) sum_s ||f_{2^(s+j)}||^2 <= (sum_j weight(j)) ||f||^2`` exactly.

    Band energies come from the frequency side and the comparison is done in
    rational arithmetic on the floating inputs.  Bands ``2**m`` outside the
    decomposition contribute zero.
    """
    if isinstance(kind, LogPoly) and kind.p <= 1:
        raise DivergentSeriesError(f"sum of j**-{kind.p} diverges")
    j_range = sorted(set(int(j) for j in j_range))
    s_range = sorted(set(int(s) for s in s_range))
    if not j_range or j_range[0] < 1:
        raise ValueError("j_range must be nonempty positive integers")
    dec = decomposition if decomposition is not None else lp_decompose(f)
    energy = {T: e for T, e in dec.energies.items() if T != "dc"}
    weights = {j: _weight(kind, j) for j in j_range}
    per_j = {}
    lhs = Fraction(0)
    for j in j_range:
        sj = Fraction(0)
        for s in s_range:
            m = s + j
            if m >= 0:
                sj += Fraction(energy.get(2**m, 0.0))
        per_j[j] = float(sj)
        lhs += Fraction(weights[j]) * sj
    constant = sum((Fraction(wj) for wj in weights.values()), Fraction(0))
    # ||f||^2 from the same spectral energies, so band orthogonality is exact
    norm_sq = Fraction(dec.energies["dc"]) + sum((Fraction(e) for e in energy.values()), Fraction(0))
    bound = constant * norm_sq
    return ScaleSumRecord(weights, per_j, float(lhs), float(constant), float(norm_sq), float(bound), lhs <= bound)
