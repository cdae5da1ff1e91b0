"""Greedy Vitali-type covering for rectangle populations, with an exact certificate.

Given admissible rectangles ``R`` (``theta <= W/L < 2 theta``,
``|V(R)| >= delta |R|`` and ``mean_V(R) |f| > lambda``), the certificate
selects a disjoint subfamily greedily by length, shows every member lies in
the 10-fold dilation of a selected one, and checks

    |K| <= sum |R'| <= 100 sum |R| <= (100/delta) sum |V| <= (100/(delta lambda)) ||f||_1

in rational arithmetic.  ``|R| = L W`` is geometric, ``|V|`` and ``|K|`` are
cell counts times ``h**2``.  The first step holds because every cell *square*
of ``K`` is checked to lie inside some selected dilation.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import AuditFailure
from .field import FieldSpec, constant, noise_field, rotation
from .geometry import OrientedRect, RasterGrid, RasterMask, axis_angle, dilate, line_angle, population
from .operators import GridFunction, density_ok, exact_sum

log = logging.getLogger(__name__)

__all__ = [
    "Member",
    "AdmissibleFamily",
    "NotApplicableError",
    "Selection",
    "greedy_disjoint",
    "PairEvidence",
    "containment_lemma_check",
    "CoveringCertificate",
    "covering_certificate",
    "random_admissible_family",
    "make_member",
]

DILATION = 10
ANGLE_SLACK = 1e-12  # rounding allowance for the triangle inequality between computed angles


class NotApplicableError(ValueError):
    """The containment lemma was called outside its hypotheses."""


@dataclass(frozen=True, eq=False)
class Member:
    rect: OrientedRect
    v_mask: RasterMask
    integral: Fraction  # exact h**2 * sum of |f| over V

    @property
    def v_count(self) -> int:
        return self.v_mask.count

    @property
    def v_measure(self) -> Fraction:
        return self.v_count * Fraction(self.v_mask.grid.cell_area)

    @property
    def mean(self) -> float:
        c = self.v_count
        return float(self.integral / self.v_measure) if c else 0.0


def make_member(field: FieldSpec, rect: OrientedRect, f: GridFunction) -> Member:
    v = population(field, rect, f.grid)
    absf = np.abs(f.values)
    integral = exact_sum(absf[v.cells]) * Fraction(f.grid.cell_area)
    return Member(rect, v, integral)


@dataclass(eq=False)
class AdmissibleFamily:
    field: FieldSpec
    f: GridFunction
    members: list
    delta: float
    theta: float
    lam: float
    seed: int | None = None

    @property
    def grid(self) -> RasterGrid:
        return self.f.grid

    def violations(self) -> list[tuple[int, str]]:
        """``(index, reason)`` for every member breaking a class constraint."""
        out = []
        th = Fraction(self.theta)
        lam = Fraction(self.lam)
        h2 = self.grid.cell_area
        for k, m in enumerate(self.members):
            L, W = Fraction(m.rect.L), Fraction(m.rect.W)
            if not (th * L <= W < 2 * th * L):
                out.append((k, f"eccentricity W/L={m.rect.W / m.rect.L:.6g} outside [theta, 2 theta)"))
            elif not density_ok(m.v_count, h2, m.rect.L, m.rect.W, self.delta):
                out.append((k, f"density |V|={float(m.v_measure):.6g} < delta |R|={self.delta * m.rect.area:.6g}"))
            elif not m.integral > lam * m.v_measure:
                out.append((k, f"mean {m.mean:.6g} does not exceed lambda {self.lam:.6g}"))
        return out

    def validate(self) -> None:
        if not self.members:
            raise ValueError("family is empty")
        bad = self.violations()
        if bad:
            k, why = bad[0]
            raise ValueError(f"member {k} is not admissible: {why}")


@dataclass(frozen=True)
class Selection:
    order: list  # member indices in processing order
    selected: list  # member indices in selection order
    blocker: dict  # unselected index -> first selected index whose V meets it


def _order(members: Sequence[Member]) -> list:
    return sorted(range(len(members)), key=lambda k: (-members[k].rect.L, -members[k].v_count, k))


def greedy_disjoint(family: AdmissibleFamily) -> Selection:
    """Select greedily by (L desc, |V| desc, index asc) among pairwise disjoint V-masks."""
    family.validate()
    members = family.members
    order = _order(members)
    owner = np.full(family.grid.shape, -1, dtype=np.int64)
    selected, blocker = [], {}
    for k in order:
        cells = members[k].v_mask.cells
        hit = owner[cells]
        hit = hit[hit >= 0]
        if len(hit):
            # the earliest selected member met (all selected before k have L >= L_k)
            pos = {s: p for p, s in enumerate(selected)}
            blocker[k] = min(hit.tolist(), key=pos.__getitem__)
        else:
            owner[cells] = k
            selected.append(k)
    return Selection(order, selected, blocker)


@dataclass(frozen=True)
class PairEvidence:
    member: int
    selected: int
    z0: tuple  # (row, col) of the shared cell
    phi0: float
    phi1: float
    phi2: float
    short_extent: float
    long_extent: float
    W_i: float
    L_0: float
    checks: tuple  # results of steps (i)..(iv)
    margin_flag: bool
    slack: float  # 1 - max normalised corner coordinate of R0 in R_i' (positive: strictly inside)

    @property
    def passed(self) -> bool:
        return all(self.checks)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["z0"] = list(self.z0)
        d["checks"] = list(self.checks)
        return d


def _boundary_distance(rect: OrientedRect, p) -> float:
    loc = rect.local(p)
    return float(min(0.5 * rect.L - abs(loc[0]), 0.5 * rect.W - abs(loc[1])))


def containment_lemma_check(
    field: FieldSpec, r0: Member, ri: Member, theta: float, i0: int = -1, ii: int = -1
) -> PairEvidence:
    """Walk the angle and projection bounds showing ``R0`` lies in the 10-fold dilation of ``Ri``.

    Steps: (i) ``phi0 <= phi1 + phi2``; (ii) ``phi0 < 2 theta <= 2 W_i/L_i``;
    (iii) ``R0`` spans at most ``4 W_i`` across and ``2 L_0`` along the axis of
    ``Ri``; (iv) the corners of ``R0`` lie in the dilation.
    """
    a, b = r0.rect, ri.rect
    if a.L > b.L:
        raise NotApplicableError("R0 must not be longer than Ri")
    th = Fraction(theta)
    for r in (a, b):
        if not th * Fraction(r.L) <= Fraction(r.W) < 2 * th * Fraction(r.L):
            raise NotApplicableError("both rectangles must be in the theta class")
    shared = np.argwhere(r0.v_mask.cells & ri.v_mask.cells)
    if len(shared) == 0:
        raise NotApplicableError("V-masks do not meet")
    i, j = (int(c) for c in shared[0])  # first shared cell in row-major order
    grid = r0.v_mask.grid
    z0 = grid.center_of(i, j)
    v = field.evaluate(z0)
    phi1 = float(line_angle(v, a.axis))
    phi2 = float(line_angle(v, b.axis))
    phi0 = axis_angle(a.alpha, b.alpha)
    c1 = phi0 <= phi1 + phi2 + ANGLE_SLACK
    c2 = phi0 < 2 * theta and Fraction(2) * th <= 2 * Fraction(b.W) / Fraction(b.L)
    loc = b.local(a.corners())
    short_extent = float(np.ptp(loc[:, 1]))
    long_extent = float(np.ptp(loc[:, 0]))
    c3 = short_extent <= 4 * b.W and long_extent <= 2 * a.L
    big = dilate(b, DILATION)
    bl = big.local(a.corners())
    norm = np.maximum(np.abs(bl[:, 0]) / (0.5 * big.L), np.abs(bl[:, 1]) / (0.5 * big.W))
    c4 = bool(np.all(big.contains(a.corners())))
    h = grid.spacing
    margin = min(_boundary_distance(a, z0), _boundary_distance(b, z0))
    return PairEvidence(
        i0, ii, (i, j), phi0, phi1, phi2, short_extent, long_extent, b.W, a.L,
        (bool(c1), bool(c2), bool(c3), c4), margin < 2 * h, float(1 - norm.max()),
    )


@dataclass
class CoveringCertificate:
    selected: list
    dilations: list
    pair_evidence: list
    chain: dict  # name -> Fraction
    assignment: dict  # member -> selected index whose dilation holds it
    config_hash: str = ""
    seed: int | None = None
    n_members: int = 0
    extra: dict = dc_field(default_factory=dict)

    CHAIN_KEYS = ("K", "sumRp", "sumR100", "sumV_over_delta", "sum_int_over_delta_lambda", "bound")

    @property
    def chain_float(self) -> dict:
        return {k: float(v) for k, v in self.chain.items()}

    def slack(self) -> dict:
        """Relative slack ``1 - left/right`` of each chain step."""
        c = self.chain
        keys = self.CHAIN_KEYS
        return {
            f"{keys[k]}<={keys[k + 1]}": float(1 - c[keys[k]] / c[keys[k + 1]]) if c[keys[k + 1]] else 0.0
            for k in range(len(keys) - 1)
        }

    def to_dict(self) -> dict:
        cf = self.chain_float
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "n_members": self.n_members,
            "selected": list(self.selected),
            "dilations": [r.to_dict() for r in self.dilations],
            "chain": {
                "K": cf["K"],
                "sumRp": cf["sumRp"],
                "sumR100": cf["sumR100"],
                "sumV_over_delta": cf["sumV_over_delta"],
                "bound": cf["bound"],
                "sum_int_over_delta_lambda": cf["sum_int_over_delta_lambda"],
            },
            "chain_exact": {k: f"{v.numerator}/{v.denominator}" for k, v in self.chain.items()},
            "slack": self.slack(),
            "pair_evidence": [e.to_dict() for e in self.pair_evidence],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def evidence_rows(self) -> list[dict]:
        """One row per member: which selected dilation contains it and with what slack."""
        rows = []
        ev = {e.member: e for e in self.pair_evidence}
        for m in range(self.n_members):
            e = ev.get(m)
            rows.append(
                {
                    "member": m,
                    "contained_in": self.assignment[m],
                    "slack": e.slack if e is not None else self.extra["self_slack"],
                }
            )
        return rows


def _squares_inside(rect: OrientedRect, cells: np.ndarray, grid: RasterGrid) -> np.ndarray:
    """For each cell ``(row, col)``, whether the whole closed cell square lies in ``rect``."""
    h = grid.spacing
    c = grid.center_of(cells[:, 0], cells[:, 1])
    ok = np.ones(len(cells), dtype=bool)
    for dx in (-0.5 * h, 0.5 * h):
        for dy in (-0.5 * h, 0.5 * h):
            ok &= rect.contains(c + np.array([dx, dy]))
    return ok


def covering_certificate(family: AdmissibleFamily, config_hash: str = "") -> CoveringCertificate:
    """Run the selection, check the cover and the measure chain; raise :class:`AuditFailure` on any breach."""
    sel = greedy_disjoint(family)
    members = family.members
    grid = family.grid
    delta, lam = Fraction(family.delta), Fraction(family.lam)

    # disjointness of the selected populations
    total = np.zeros(grid.shape, dtype=np.int64)
    for k in sel.selected:
        total += members[k].v_mask.cells
    if total.max(initial=0) > 1:
        raise AuditFailure("selected V-masks overlap")

    dil = {k: dilate(members[k].rect, DILATION) for k in sel.selected}
    evidence, assignment = [], {k: k for k in sel.selected}
    for k in sorted(sel.blocker):
        i = sel.blocker[k]
        e = containment_lemma_check(family.field, members[k], members[i], family.theta, k, i)
        if not e.passed:
            raise AuditFailure(f"containment lemma failed for member {k} in selected {i}: checks {e.checks}")
        evidence.append(e)
        assignment[k] = i

    # K: union of all populations; every cell square must sit inside a selected dilation
    K = np.zeros(grid.shape, dtype=bool)
    for m in members:
        K |= m.v_mask.cells
    for k, m in enumerate(members):
        cells = m.v_mask.indices()
        ok = _squares_inside(dil[assignment[k]], cells, grid)
        if not ok.all():
            rest = cells[~ok]
            inside = np.zeros(len(rest), dtype=bool)
            for r in dil.values():
                inside |= _squares_inside(r, rest, grid)
            if not inside.all():
                raise AuditFailure(f"cell {tuple(rest[~inside][0])} of member {k} is not covered by any dilation")

    h2 = Fraction(grid.cell_area)
    K_meas = int(K.sum()) * h2
    sum_rp = sum((Fraction(DILATION**2) * Fraction(members[k].rect.L) * Fraction(members[k].rect.W)
                  for k in sel.selected), Fraction(0))
    sum_r100 = 100 * sum((Fraction(members[k].rect.L) * Fraction(members[k].rect.W) for k in sel.selected),
                         Fraction(0))
    sum_v = sum((members[k].v_measure for k in sel.selected), Fraction(0))
    sum_int = sum((members[k].integral for k in sel.selected), Fraction(0))
    norm1 = exact_sum(np.abs(family.f.values)) * h2
    chain = {
        "K": K_meas,
        "sumRp": sum_rp,
        "sumR100": sum_r100,
        "sumV_over_delta": 100 * sum_v / delta,
        "sum_int_over_delta_lambda": 100 * sum_int / (delta * lam),
        "bound": 100 * norm1 / (delta * lam),
    }
    keys = CoveringCertificate.CHAIN_KEYS
    for a, b in zip(keys, keys[1:]):
        if not chain[a] <= chain[b]:
            raise AuditFailure(f"chain step {a} <= {b} fails: {float(chain[a])!r} > {float(chain[b])!r}")
    return CoveringCertificate(
        selected=list(sel.selected),
        dilations=[dil[k] for k in sel.selected],
        pair_evidence=evidence,
        chain=chain,
        assignment=assignment,
        config_hash=config_hash,
        seed=family.seed,
        n_members=len(members),
        extra={"self_slack": 1 - 1 / DILATION},
    )


# ----------------------------------------------------------------------------
# seeded random families


def _random_field(rng: np.random.Generator, kind: int) -> FieldSpec:
    if kind == 0:
        a = rng.uniform(0, math.pi)
        return constant((math.cos(a), math.sin(a)), (0.0, 1.0, 0.0, 1.0), label="constant")
    if kind == 1:
        # rotation about a far-away origin: directions turn slowly across the box
        c = float(rng.choice([80.0, 200.0]))
        return rotation((c, c + 1.0, -0.5, 0.5), label=f"rotation@{c:g}")
    return noise_field(int(rng.integers(0, 2**31)), spacing=0.125, domain=(0.0, 1.0, 0.0, 1.0),
                       amplitude=0.01, label="weak-noise")


def random_admissible_family(
    seed: int,
    n: int = 256,
    delta: float | None = None,
    theta: float | None = None,
    max_members: int = 64,
    max_tries: int = 40,
) -> AdmissibleFamily:
    """A seeded admissible family on an ``n x n`` grid over a unit box.

    ``f`` is a sparse nonnegative function; each rectangle is anchored at a
    support cell of ``f``, aligned with the field there up to a jitter that
    keeps the anchor in ``V(R)``, and kept only if the density condition
    holds.  Widths are at least ``1.5 h``, so each cell square of ``V(R)``
    stays inside the 10-fold dilation that covers ``R``.
    """
    rng = np.random.default_rng(seed)
    if delta is None:
        delta = float(rng.choice([0.1, 0.3, 0.5]))
    if theta is None:
        theta = float(rng.choice([0.005, 0.009]))
    field = _random_field(rng, seed % 3)
    grid = RasterGrid.covering(field.domain, n)
    h = grid.spacing
    ny, nx = grid.shape
    n_support = int(rng.integers(20, 80))
    vals = np.zeros(grid.shape)
    rows = rng.integers(0, ny, n_support)
    cols = rng.integers(0, nx, n_support)
    vals[rows, cols] = rng.uniform(0.5, 2.0, n_support)
    f = GridFunction(grid, vals)
    target = int(rng.integers(8, max_members + 1))
    L_max = 0.9 * n * h
    W_hi = min(3.0 * h, 2 * theta * L_max * 0.95)
    members = []
    tries = 0
    while len(members) < target and tries < max_tries * target:
        tries += 1
        k = int(rng.integers(0, n_support))
        anchor = grid.center_of(rows[k], cols[k])
        W = rng.uniform(1.5 * h, W_hi)
        L = rng.uniform(W / (2 * theta), min(W / theta, L_max))
        if not (theta * L <= W < 2 * theta * L):
            continue
        v = field.evaluate(anchor)
        alpha = math.atan2(v[1], v[0]) + 0.8 * rng.uniform(-1, 1) * W / (2 * L)
        rect0 = OrientedRect((0.0, 0.0), alpha, L, W)
        shift = rng.uniform(-L / 3, L / 3) * rect0.axis + rng.uniform(-W / 3, W / 3) * rect0.normal
        rect = OrientedRect((anchor[0] + shift[0], anchor[1] + shift[1]), alpha, L, W)
        m = make_member(field, rect, f)
        if m.integral > 0 and density_ok(m.v_count, grid.cell_area, L, W, delta):
            members.append(m)
    if not members:
        raise RuntimeError(f"seed {seed}: no admissible rectangle found")
    lam = min(m.mean for m in members) * float(rng.uniform(0.5, 0.95))
    fam = AdmissibleFamily(field, f, members, delta, theta, lam, seed)
    fam.validate()
    return fam


def config_hash(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj``."""
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()
