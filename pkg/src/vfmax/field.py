"""Planar C^1 vector fields: a small catalog, evaluation and C^1 bounds.

Every field lives on an axis-aligned box ``Omega`` and stays defined on the
padded box ``Omega + margin``.  Five kinds are supported:

``constant``      v(x) = v0
``rotation``      v(x) = (-x2, x1)
``shear``         v(x) = (1, x1**k)
``flat``          v(x) = (1, exp(-1/|x1|**gamma) * sgn(x1)),  0 < gamma < 1
``grid_sampled``  bilinear interpolation of values on a uniform lattice
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy import ndimage

__all__ = [
    "DomainError",
    "FieldSpec",
    "FieldBounds",
    "KINDS",
    "constant",
    "rotation",
    "shear",
    "flat",
    "grid_sampled",
    "noise_field",
    "load_csv",
    "evaluate_field",
    "field_bounds",
    "catalog",
    "catalog_field",
    "field_from_dict",
]

KINDS = ("constant", "rotation", "shear", "flat", "grid_sampled")

DEFAULT_DOMAIN = (-1.0, 1.0, -1.0, 1.0)


class DomainError(ValueError):
    """A point (or a segment) falls outside the padded box of a field."""


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """A catalog entry describing one planar vector field.

    ``domain`` is ``(xmin, xmax, ymin, ymax)``.  ``margin`` defaults to a
    quarter of the box diameter.
    """

    kind: str
    params: Mapping[str, Any]
    domain: tuple[float, float, float, float] = DEFAULT_DOMAIN
    margin: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}; expected one of {KINDS}")
        xmin, xmax, ymin, ymax = (float(c) for c in self.domain)
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"degenerate domain {self.domain}")
        object.__setattr__(self, "domain", (xmin, xmax, ymin, ymax))
        if self.margin is None:
            object.__setattr__(self, "margin", 0.25 * math.hypot(xmax - xmin, ymax - ymin))
        if not self.margin > 0:
            raise ValueError("margin must be positive")
        if not self.label:
            object.__setattr__(self, "label", self.kind)
        _validate_params(self)

    @property
    def padded(self) -> tuple[float, float, float, float]:
        xmin, xmax, ymin, ymax = self.domain
        m = self.margin
        return (xmin - m, xmax + m, ymin - m, ymax + m)

    def contains(self, points, padded=True) -> np.ndarray:
        """Boolean mask of points inside the (padded) box."""
        pts = np.asarray(points, dtype=float)
        xmin, xmax, ymin, ymax = self.padded if padded else self.domain
        return (
            (pts[..., 0] >= xmin)
            & (pts[..., 0] <= xmax)
            & (pts[..., 1] >= ymin)
            & (pts[..., 1] <= ymax)
        )

    def __call__(self, points) -> np.ndarray:
        return self.evaluate(points)

    def evaluate(self, points) -> np.ndarray:
        """Evaluate the field at ``points`` of shape ``(..., 2)``.

        Raises :class:`DomainError` if any point leaves the padded box.
        """
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != 2:
            raise ValueError(f"points must have trailing dimension 2, got {pts.shape}")
        inside = self.contains(pts)
        if not np.all(inside):
            bad = pts[~inside].reshape(-1, 2)[0]
            raise DomainError(
                f"point ({bad[0]:.6g}, {bad[1]:.6g}) outside padded box {self.padded} of field {self.label!r}"
            )
        return self._raw(pts)

    def _raw(self, pts: np.ndarray) -> np.ndarray:
        x1 = pts[..., 0]
        x2 = pts[..., 1]
        kind = self.kind
        if kind == "constant":
            v0 = self.params["v0"]
            out = np.empty(pts.shape, dtype=float)
            out[..., 0] = v0[0]
            out[..., 1] = v0[1]
            return out
        if kind == "rotation":
            return np.stack([-x2, x1], axis=-1)
        if kind == "shear":
            return np.stack([np.ones_like(x1), x1 ** int(self.params["k"])], axis=-1)
        if kind == "flat":
            return np.stack([np.ones_like(x1), flat_profile(x1, self.params["gamma"])], axis=-1)
        # grid_sampled
        values = self.params["values"]
        ox, oy = self.params["origin"]
        h = self.params["spacing"]
        coords = np.stack([(x2 - oy) / h, (x1 - ox) / h]).reshape(2, -1)
        vx = ndimage.map_coordinates(values[..., 0], coords, order=1, mode="nearest")
        vy = ndimage.map_coordinates(values[..., 1], coords, order=1, mode="nearest")
        return np.stack([vx, vy], axis=-1).reshape(pts.shape)

    def to_dict(self) -> dict:
        """JSON-friendly description (grid values are inlined as nested lists)."""
        params = dict(self.params)
        if self.kind == "grid_sampled":
            params = {
                "values": np.asarray(params["values"]).tolist(),
                "origin": list(params["origin"]),
                "spacing": params["spacing"],
            }
        elif self.kind == "constant":
            params = {"v0": [float(c) for c in params["v0"]]}
        return {
            "kind": self.kind,
            "params": params,
            "domain": list(self.domain),
            "margin": self.margin,
            "label": self.label,
        }


@dataclass(frozen=True)
class FieldBounds:
    B: float
    sup_v: float
    epsilon0: float


def flat_profile(s, gamma):
    """``exp(-1/|s|**gamma) * sgn(s)`` with the limit value 0 at ``s = 0``."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    out = np.zeros_like(a)
    nz = a > 0
    out[nz] = np.exp(-1.0 / a[nz] ** gamma) * np.sign(s[nz])
    return out


def _validate_params(spec: FieldSpec):
    p = spec.params
    if spec.kind == "constant":
        v0 = tuple(float(c) for c in p["v0"])
        if len(v0) != 2:
            raise ValueError("constant field needs a 2-vector v0")
        object.__setattr__(spec, "params", {"v0": v0})
    elif spec.kind == "shear":
        k = p["k"]
        if int(k) != k or k < 1:
            raise ValueError(f"shear exponent must be an integer >= 1, got {k}")
        object.__setattr__(spec, "params", {"k": int(k)})
    elif spec.kind == "flat":
        gamma = float(p["gamma"])
        if not 0 < gamma < 1:
            raise ValueError(f"flat exponent must satisfy 0 < gamma < 1, got {gamma}")
        object.__setattr__(spec, "params", {"gamma": gamma})
    elif spec.kind == "grid_sampled":
        values = np.asarray(p["values"], dtype=float)
        h = float(p["spacing"])
        ox, oy = (float(c) for c in p["origin"])
        if not h > 0:
            raise ValueError("grid spacing must be positive")
        if values.ndim != 3 or values.shape[2] != 2 or min(values.shape[:2]) < 2:
            raise ValueError(f"grid values must have shape (ny, nx, 2), got {values.shape}")
        ny, nx = values.shape[:2]
        pxmin, pxmax, pymin, pymax = spec.padded
        slack = 1e-9 * h
        if (
            ox > pxmin + slack
            or oy > pymin + slack
            or ox + (nx - 1) * h < pxmax - slack
            or oy + (ny - 1) * h < pymax - slack
        ):
            raise ValueError(
                f"sampled lattice [{ox}, {ox + (nx - 1) * h}] x [{oy}, {oy + (ny - 1) * h}] "
                f"does not cover the padded box {spec.padded}"
            )
        values.setflags(write=False)
        object.__setattr__(spec, "params", {"values": values, "origin": (ox, oy), "spacing": h})


def constant(v0=(1.0, 0.0), domain=DEFAULT_DOMAIN, margin=None, label="") -> FieldSpec:
    return FieldSpec("constant", {"v0": v0}, domain, margin, label)


def rotation(domain=DEFAULT_DOMAIN, margin=None, label="") -> FieldSpec:
    return FieldSpec("rotation", {}, domain, margin, label)


def shear(k=2, domain=DEFAULT_DOMAIN, margin=None, label="") -> FieldSpec:
    return FieldSpec("shear", {"k": k}, domain, margin, label)


def flat(gamma=0.5, domain=DEFAULT_DOMAIN, margin=None, label="") -> FieldSpec:
    return FieldSpec("flat", {"gamma": gamma}, domain, margin, label)


def grid_sampled(values, origin, spacing, domain=DEFAULT_DOMAIN, margin=None, label="") -> FieldSpec:
    return FieldSpec(
        "grid_sampled", {"values": values, "origin": origin, "spacing": spacing}, domain, margin, label
    )


def _lattice_for(domain, margin, spacing):
    xmin, xmax, ymin, ymax = domain
    if margin is None:
        margin = 0.25 * math.hypot(xmax - xmin, ymax - ymin)
    ox, oy = xmin - margin, ymin - margin
    nx = int(math.ceil((xmax + margin - ox) / spacing - 1e-9)) + 1
    ny = int(math.ceil((ymax + margin - oy) / spacing - 1e-9)) + 1
    return (ox, oy), nx, ny, margin


def noise_field(
    seed=0, spacing=0.125, smooth=1.5, domain=DEFAULT_DOMAIN, margin=None, label="", amplitude=0.4
) -> FieldSpec:
    """Seeded random smooth field sampled on a lattice (kind ``grid_sampled``).

    The field is ``(1, 0)`` plus a Gaussian-smoothed noise perturbation, so it
    never vanishes and rotates by an irregular amount controlled by
    ``amplitude`` (sup-norm of the perturbation, must be < 1).
    """
    if not 0 <= amplitude < 1:
        raise ValueError("noise amplitude must lie in [0, 1)")
    (ox, oy), nx, ny, margin = _lattice_for(domain, margin, spacing)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((ny, nx, 2))
    for c in range(2):
        noise[..., c] = ndimage.gaussian_filter(noise[..., c], smooth, mode="reflect")
    noise *= amplitude / max(np.abs(noise).max(), 1e-300)
    noise[..., 0] += 1.0
    return grid_sampled(noise, (ox, oy), spacing, domain, margin, label or f"noise{seed}")


def load_csv(path, domain=None, margin=None, label="") -> FieldSpec:
    """Load a ``grid_sampled`` field from CSV with header ``x,y,vx,vy``.

    Rows must form a complete rectangular lattice with equal spacing in x and
    y.  Without ``domain`` the lattice itself is taken as the padded box.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [c.strip() for c in next(reader)]
        if header != ["x", "y", "vx", "vy"]:
            raise ValueError(f"{path}: expected header x,y,vx,vy, got {','.join(header)}")
        rows = np.array([[float(c) for c in row] for row in reader if row], dtype=float)
    xs = np.unique(rows[:, 0])
    ys = np.unique(rows[:, 1])
    if len(xs) < 2 or len(ys) < 2 or len(rows) != len(xs) * len(ys):
        raise ValueError(f"{path}: points do not form a complete rectangular lattice")
    hx = np.diff(xs)
    hy = np.diff(ys)
    h = hx[0]
    if not (np.allclose(hx, h, rtol=1e-9) and np.allclose(hy, h, rtol=1e-9)):
        raise ValueError(f"{path}: lattice spacing must be uniform and equal in x and y")
    values = np.empty((len(ys), len(xs), 2))
    ix = np.searchsorted(xs, rows[:, 0])
    iy = np.searchsorted(ys, rows[:, 1])
    values[iy, ix] = rows[:, 2:4]
    if domain is None:
        # padded box == lattice extent
        if margin is None:
            margin = 0.1 * min(xs[-1] - xs[0], ys[-1] - ys[0])
        domain = (xs[0] + margin, xs[-1] - margin, ys[0] + margin, ys[-1] - margin)
    return grid_sampled(values, (xs[0], ys[0]), float(h), domain, margin, label or path.stem)


def evaluate_field(spec: FieldSpec, point) -> np.ndarray:
    """Value of the field at a single point (or an array of points)."""
    return spec.evaluate(point)


def _closed_form_bounds(spec: FieldSpec, res: int):
    xmin, xmax, ymin, ymax = spec.domain
    hx = (xmax - xmin) / res
    hy = (ymax - ymin) / res
    X, Y = np.meshgrid(np.linspace(xmin, xmax, res + 1), np.linspace(ymin, ymax, res + 1))
    pts = np.stack([X, Y], axis=-1)
    v = spec.evaluate(pts)
    sup_v = float(np.max(np.hypot(v[..., 0], v[..., 1])))
    dx = np.array([hx, 0.0])
    dy = np.array([0.0, hy])
    d_dx = (spec.evaluate(pts + dx) - spec.evaluate(pts - dx)) / (2 * hx)
    d_dy = (spec.evaluate(pts + dy) - spec.evaluate(pts - dy)) / (2 * hy)
    jac = np.stack([d_dx, d_dy], axis=-1)  # jac[..., i, j] = d v_i / d x_j
    jnorm = float(np.max(np.linalg.norm(jac, ord=2, axis=(-2, -1))))
    return sup_v, jnorm


def _cell_range(lo, hi, origin, h, n):
    """Indices of lattice cells [origin + i h, origin + (i+1) h] overlapping [lo, hi]."""
    i0 = max(int(math.floor((lo - origin) / h)), 0)
    i1 = min(int(math.ceil((hi - origin) / h)), n - 1)
    return i0, i1  # cells i0 .. i1-1


def _sampled_bounds(spec: FieldSpec):
    values = spec.params["values"]
    ox, oy = spec.params["origin"]
    h = spec.params["spacing"]
    ny, nx = values.shape[:2]
    xmin, xmax, ymin, ymax = spec.domain
    j0, j1 = _cell_range(xmin, xmax, ox, h, nx)
    i0, i1 = _cell_range(ymin, ymax, oy, h, ny)
    V = values[i0 : i1 + 1, j0 : j1 + 1]
    sup_v = float(np.max(np.hypot(V[..., 0], V[..., 1])))
    # The interpolant is bilinear on each cell, so its Jacobian is affine there and
    # the operator norm (convex) peaks at a cell corner, using one-sided cell slopes.
    ddx = (V[:, 1:] - V[:, :-1]) / h  # on horizontal edges: (rows, cells_x, 2)
    ddy = (V[1:, :] - V[:-1, :]) / h  # on vertical edges: (cells_y, cols, 2)
    jmax = 0.0
    for a in (0, 1):  # bottom/top edge of the cell
        for b in (0, 1):  # left/right edge of the cell
            gx = ddx[a : a + ddx.shape[0] - 1]
            gy = ddy[:, b : b + ddy.shape[1] - 1]
            jac = np.stack([gx, gy], axis=-1)
            jmax = max(jmax, float(np.max(np.linalg.norm(jac, ord=2, axis=(-2, -1)))))
    return sup_v, jmax


def field_bounds(spec: FieldSpec, grid_resolution: int = 256) -> FieldBounds:
    """Estimate the C^1 bound ``B``, ``sup |v|`` and an admissible ``epsilon0``.

    Closed-form kinds are sampled on a ``(grid_resolution + 1)**2`` lattice over
    the domain with central differences at spacing ``side / grid_resolution``.
    Sampled fields use the exact cell-wise slopes of their own lattice instead
    (central differences straddling lattice lines would average two slopes).
    """
    if grid_resolution < 16:
        raise ValueError("grid_resolution must be at least 16")
    if spec.kind == "grid_sampled":
        sup_v, jnorm = _sampled_bounds(spec)
    else:
        sup_v, jnorm = _closed_form_bounds(spec, grid_resolution)
    B = max(sup_v, jnorm)
    eps0 = 1.0 / (100.0 * max(B, 1.0))
    if sup_v > 0:
        eps0 = min(spec.margin / sup_v, eps0)
    return FieldBounds(B=B, sup_v=sup_v, epsilon0=eps0)


def catalog(domain=DEFAULT_DOMAIN) -> dict[str, FieldSpec]:
    """The default labelled catalog: one representative per kind (plus ``shear1``)."""
    return {
        "constant": constant((1.0, 0.0), domain, label="constant"),
        "rotation": rotation(domain, label="rotation"),
        "shear2": shear(2, domain, label="shear2"),
        "shear1": shear(1, domain, label="shear1"),
        "flat": flat(0.5, domain, label="flat"),
        "noise": noise_field(0, domain=domain, label="noise"),
    }


KIND_SCHEMAS = {
    "constant": {"params": {"v0": "pair of reals"}, "example": {"v0": [1.0, 0.0]}},
    "rotation": {"params": {}, "example": {}},
    "shear": {"params": {"k": "integer >= 1"}, "example": {"k": 2}},
    "flat": {"params": {"gamma": "real in (0, 1)"}, "example": {"gamma": 0.5}},
    "grid_sampled": {
        "params": {
            "csv": "path to CSV with header x,y,vx,vy",
            "seed": "or: seed of a smooth noise field",
            "spacing": "lattice spacing of the noise field",
            "amplitude": "size of the noise perturbation, in [0, 1)",
        },
        "example": {"seed": 0, "spacing": 0.125},
    },
}


def field_from_dict(d: Mapping[str, Any]) -> FieldSpec:
    """Build a field from a config entry.

    Either ``{"label": <catalog label>}`` or ``{"kind": ..., "params": {...}}``
    with optional ``domain``, ``margin`` and ``label``.
    """
    if "kind" not in d:
        label = d.get("label")
        domain = tuple(d.get("domain", DEFAULT_DOMAIN))
        cat = catalog(domain)
        if label not in cat:
            raise KeyError(f"field.label: unknown catalog label {label!r}; known: {sorted(cat)}")
        return cat[label]
    kind = d["kind"]
    params = dict(d.get("params", {}))
    domain = tuple(d.get("domain", DEFAULT_DOMAIN))
    margin = d.get("margin")
    label = d.get("label", "")
    if kind == "grid_sampled":
        if "csv" in params:
            return load_csv(params["csv"], domain=domain if "domain" in d else None, margin=margin, label=label)
        if "values" in params:
            return grid_sampled(params["values"], params["origin"], params["spacing"], domain, margin, label)
        return noise_field(int(params.get("seed", 0)), float(params.get("spacing", 0.125)), domain=domain,
                           margin=margin, label=label, amplitude=float(params.get("amplitude", 0.4)))
    return FieldSpec(kind, params, domain, margin, label)
