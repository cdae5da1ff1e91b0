"""Configuration-driven experiment runner.

Every scenario reads an :class:`ExperimentConfig`, writes CSV/JSON artifacts
to the output directory and finishes with ``manifest.json`` listing each file
with its SHA-256.  Artifacts never contain timestamps or the worker count, so
identical config and seed give identical checksums for any ``--workers``.

Exit codes: 0 success, 1 failed assertion, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .angular import (
    DEFAULT_NT,
    ExpLog,
    LogPoly,
    SublevelCurve,
    angular_profiles,
    balance_residual,
    balance_tau,
    bound_factor,
    decay_from_dict,
    doubling_check,
    fit_decay_constant,
    integral_condition,
    kernel_split_audit,
    markov_transfer,
    tau_grid,
)
from .covering import DILATION, covering_certificate, random_admissible_family
from .errors import AuditFailure, DivergentSeriesError, RegimeError
from .field import KIND_SCHEMAS, catalog, field_from_dict
from .geometry import RasterGrid, omega_partition
from .operators import (
    GridFunction,
    build_family,
    lp_decompose,
    maximal_Mv,
    scale_sum_audit,
    tilde_maximal,
    weak_type_curve,
)

SCENARIOS = (
    "audit-decay",
    "doubling",
    "balance",
    "kernel-split",
    "lp",
    "maximal",
    "weak-type",
    "covering",
    "scale-sum",
)
GENERATOR = "numpy.random.PCG64 seeded through SeedSequence/1"
MANIFEST = "manifest.json"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


class SchemaError(ValueError):
    """A result file has an unexpected schema or version."""


# ----------------------------------------------------------------------------
# configuration

_SCENARIO_PARAMS: dict[str, dict[str, Any]] = {
    "audit-decay": {
        "kinds": [{"kind": "power", "exponents": {"c0": 1.0}}, {"kind": "logpoly", "exponents": {"p": 2.0}}],
        "integral_kinds": [
            {"kind": "power", "exponents": {"c0": 0.5}},
            {"kind": "explog", "exponents": {"sigma": 0.5, "c1": 0.5}},
            {"kind": "logpoly", "exponents": {"p": 1.0}},
        ],
    },
    "doubling": {"p": 2.0, "C": None},
    "balance": {
        "regimes": [{"kind": "logpoly", "exponents": {"p": 2.0}}, {"kind": "explog", "exponents": {"sigma": 1.0, "c1": 1.0}}],
        "Tdeltas": [math.e, math.e**2, math.e**3, 10.0],
        "C": 1.0,
    },
    "kernel-split": {"a_values": [10.0, 100.0]},
    "lp": {},
    "maximal": {"f": "bump"},
    "weak-type": {"delta": 0.5, "theta": 0.009, "f": "one-cell", "stride": 32, "n_alpha": 8,
                  "width_factors": [1.0, 1.25, 1.5, 1.75]},
    "covering": {"families": 1, "delta": None, "theta": None, "max_members": 64},
    "scale-sum": {"p": 2.0, "J": 16, "s_range": [0, 16]},
}

_DEFAULT_GRID = {"lp": 256, "scale-sum": 256, "covering": 256, "weak-type": 256, "maximal": 64}
# rectangle classes need a slowly turning field: rotation seen from far away
_DEFAULT_FIELD = {"weak-type": {"kind": "rotation", "params": {}, "domain": [100.0, 101.0, -0.5, 0.5]}}


@dataclass
class ExperimentConfig:
    scenario: str
    field: dict | None = None
    grid: int | None = None
    seed: int = 0
    eps: list = dc_field(default_factory=lambda: [0.25, 0.125, 0.0625])
    points: list = dc_field(default_factory=lambda: [[0.5, 0.0], [0.0, 0.5], [-0.3, 0.4]])
    taus: dict = dc_field(default_factory=lambda: {"n": 64, "lo": 1e-9, "hi": 1 - 1e-6})
    lambdas: list | None = None
    n_t: int = 1024
    params: dict = dc_field(default_factory=dict)
    out: str = "out"
    workers: int = 1

    # keys that do not influence results
    _RUNTIME = ("out", "workers")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        for key in d:
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}")
        if "scenario" not in d:
            raise ConfigError("missing config key 'scenario'")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: unknown scenario {self.scenario!r}; expected one of {list(SCENARIOS)}")
        allowed = _SCENARIO_PARAMS[self.scenario]
        for key in self.params:
            if key not in allowed:
                raise ConfigError(f"params.{key}: not a parameter of scenario {self.scenario!r}")
        if not isinstance(self.seed, int) or self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        if self.grid is not None and (not isinstance(self.grid, int) or self.grid < 16):
            raise ConfigError("grid: must be an integer >= 16")
        if not isinstance(self.n_t, int) or self.n_t < 64 or self.n_t % 2:
            raise ConfigError("n_t: must be an even integer >= 64")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers: must be a positive integer")
        if not self.eps or any(not (isinstance(e, (int, float)) and e > 0) for e in self.eps):
            raise ConfigError("eps: must be a nonempty list of positive reals")
        for p in self.points:
            if not (isinstance(p, (list, tuple)) and len(p) == 2):
                raise ConfigError("points: each point must be a pair of reals")
        for k in self.taus:
            if k not in ("n", "lo", "hi"):
                raise ConfigError(f"taus.{k}: expected keys n, lo, hi")
        try:
            self.field_spec()
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"field: {exc}") from None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def resolved_params(self) -> dict:
        p = json.loads(json.dumps(_SCENARIO_PARAMS[self.scenario]))
        p.update(self.params)
        return p

    def grid_n(self) -> int:
        return self.grid if self.grid is not None else _DEFAULT_GRID.get(self.scenario, 64)

    def field_spec(self):
        return field_from_dict(self.field if self.field is not None else _DEFAULT_FIELD.get(self.scenario, {"label": "rotation"}))

    def tau_values(self) -> np.ndarray:
        t = {"n": 64, "lo": 1e-9, "hi": 1 - 1e-6, **self.taus}
        return tau_grid(int(t["n"]), float(t["lo"]), float(t["hi"]))

    def hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in self._RUNTIME}
        d["params"] = self.resolved_params()
        d["grid"] = self.grid_n()
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(blob.encode()).hexdigest()

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, stream])))


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    version: str
    generator: str
    scenario: str
    workers: int
    started: str
    finished: str
    files: list
    status: str
    message: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ----------------------------------------------------------------------------
# output helpers


class _Writer:
    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []

    def _path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def json(self, name: str, obj) -> None:
        text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True)
        self._path(name).write_text(text + "\n")

    def csv(self, name: str, header: Sequence[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        self._path(name).write_text(buf.getvalue())

    def bytes(self, name: str, data: bytes) -> None:
        self._path(name).write_bytes(data)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _pmap(fn: Callable, items: list, workers: int) -> list:
    """Ordered map; the work split is fixed by ``items``, never by ``workers``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


# ----------------------------------------------------------------------------
# scenarios


def _profile_items(cfg: ExperimentConfig):
    fld = cfg.field_spec()
    return [(fld, [tuple(p) for p in cfg.points], float(e), cfg.n_t) for e in cfg.eps]


def _profiles_task(item):
    fld, pts, eps, n_t = item
    return angular_profiles(fld, pts, eps, n_t)


def _scenario_audit_decay(cfg: ExperimentConfig, w: _Writer) -> None:
    p = cfg.resolved_params()
    fld = cfg.field_spec()
    taus = cfg.tau_values()
    profiles = [pr for chunk in _pmap(_profiles_task, _profile_items(cfg), cfg.workers) for pr in chunk]
    live = [pr for pr in profiles if not pr.degenerate]
    skipped = [{"x1": float(pr.x[0]), "x2": float(pr.x[1]), "eps": pr.eps} for pr in profiles if pr.degenerate]
    sweep = []
    reports = {}
    for kd in p["kinds"]:
        kind = decay_from_dict(kd)
        tag = f"{kind.name}_" + "_".join(f"{k}{v:g}" for k, v in kind.exponents.items())
        if live:
            rep = fit_decay_constant(live, kind, taus)
            w.json(f"decay_{tag}.json", rep.to_dict())
            reports[tag] = rep.C_min
        env = kind.envelope(taus)
        for pr in live:
            meas = SublevelCurve(pr).measure_of(taus)
            for t, m, e in zip(taus, meas, env):
                ratio = 0.0 if math.isinf(e) else m / (e * pr.eps)
                sweep.append((fld.label, tag, pr.x[0], pr.x[1], pr.eps, t, m, e, ratio))
    w.csv("sweep.csv", ["field", "kind", "x1", "x2", "eps", "tau", "measure", "envelope", "ratio"], sweep)
    markov_rows, integrals = [], []
    for kd in p["integral_kinds"]:
        kind = decay_from_dict(kd)
        for pr in live:
            A = integral_condition(pr, kind)
            integrals.append({"kind": kind.name, "exponents": kind.exponents, "x1": float(pr.x[0]),
                              "x2": float(pr.x[1]), "eps": pr.eps, "A": A if math.isfinite(A) else "divergent"})
            if not math.isfinite(A):
                continue
            rec = markov_transfer(pr, kind, A, taus)
            for t, m, b in zip(rec.taus, rec.measures, rec.bounds):
                markov_rows.append((kind.name, pr.x[0], pr.x[1], pr.eps, A, t, m, b))
    w.csv("markov.csv", ["kind", "x1", "x2", "eps", "A", "tau", "measure", "bound"], markov_rows)
    w.json("summary.json", {"schema": "vfmax.audit_summary/1", "field": fld.label, "C_min": reports,
                            "degenerate": skipped, "integrals": integrals})


def _fit_C(cfg, fld, p_exp):
    profs = [pr for e in cfg.eps for pr in angular_profiles(fld, cfg.points, e, cfg.n_t) if not pr.degenerate]
    if not profs:
        return 0.0
    return fit_decay_constant(profs, LogPoly(p_exp), cfg.tau_values()).C_min


def _scenario_doubling(cfg: ExperimentConfig, w: _Writer) -> None:
    p = cfg.resolved_params()
    fld = cfg.field_spec()
    C = p["C"] if p["C"] is not None else _fit_C(cfg, fld, p["p"])
    rows, failures = [], []
    for e in cfg.eps:
        for x in cfg.points:
            r = doubling_check(fld, x, e, C, p["p"], cfg.n_t)
            rows.append((fld.label, x[0], x[1], e, r.sup_eps, r.sup_2eps, r.tau0, r.ratio, int(r.passed)))
            if not r.passed:
                failures.append((x, e, r.ratio, 1 / r.tau0))
    w.csv("doubling.csv", ["field", "x1", "x2", "eps", "sup_eps", "sup_2eps", "tau0", "ratio", "passed"], rows)
    w.json("doubling.json", {"schema": "vfmax.doubling/1", "field": fld.label, "C": C, "p": p["p"],
                             "passed": not failures})
    if failures:
        x, e, ratio, lim = failures[0]
        raise AuditFailure(f"doubling fails at x={x}, eps={e}: ratio {ratio!r} > 1/tau0 = {lim!r}")


def _scenario_balance(cfg: ExperimentConfig, w: _Writer) -> None:
    p = cfg.resolved_params()
    rows, worst = [], 0.0
    for rd in p["regimes"]:
        reg = decay_from_dict(rd)
        for Td in p["Tdeltas"]:
            tau = balance_tau(reg, Td)
            res = balance_residual(reg, Td, tau)
            worst = max(worst, abs(res))
            rows.append((reg.name, json.dumps(reg.exponents, sort_keys=True), Td, tau, res, bound_factor(reg, Td, p["C"])))
    w.csv("balance.csv", ["regime", "exponents", "Tdelta", "tau", "residual", "factor"], rows)
    if not worst < 1e-12:
        raise AuditFailure(f"balance residual {worst!r} >= 1e-12")


def _scenario_kernel_split(cfg: ExperimentConfig, w: _Writer) -> None:
    p = cfg.resolved_params()
    fld = cfg.field_spec()
    taus = cfg.tau_values()
    rows, skipped = [], []
    for e in cfg.eps:
        for pr in angular_profiles(fld, cfg.points, e, cfg.n_t):
            for a in p["a_values"]:
                if pr.degenerate or not a * pr.sup_w > 1:
                    skipped.append({"x1": float(pr.x[0]), "x2": float(pr.x[1]), "eps": e, "a": a})
                    continue
                T = a * pr.v_norm / pr.eps
                rec = kernel_split_audit(pr, T, pr.v_norm, taus)
                for t, t1, t2 in zip(rec.taus, rec.term1, rec.term2):
                    rows.append((fld.label, pr.x[0], pr.x[1], e, a, t, rec.lhs, t1, t2))
    w.csv("kernel_split.csv", ["field", "x1", "x2", "eps", "a", "tau", "lhs", "term1", "term2"], rows)
    w.json("kernel_split.json", {"schema": "vfmax.kernel_split/1", "skipped_out_of_regime": skipped})


def _random_f(cfg: ExperimentConfig) -> GridFunction:
    n = cfg.grid_n()
    grid = RasterGrid((0.0, 0.0), 1.0 / n, (n, n))
    return GridFunction(grid, cfg.rng(1).standard_normal((n, n)))


def _scenario_lp(cfg: ExperimentConfig, w: _Writer) -> None:
    f = _random_f(cfg)
    dec = lp_decompose(f)
    rec_err = float(np.abs(dec.reconstruct().values - f.values).max())
    n2 = f.norm2() ** 2
    spatial = dec.dc_block.norm2() ** 2 + sum(g.norm2() ** 2 for _, g in dec.bands)
    planch = abs(spatial - n2) / n2
    w.csv("bands.csv", ["T", "energy"], [("dc", dec.energies["dc"])] + [(T, dec.energies[T]) for T, _ in dec.bands])
    ok = rec_err < 1e-10 and planch < 1e-10
    w.json("lp.json", {"schema": "vfmax.lp/1", "n": f.grid.shape[0], "reconstruction_linf": rec_err,
                       "plancherel_rel": planch, "passed": ok})
    if not ok:
        raise AuditFailure(f"Littlewood-Paley invariants fail: reconstruction {rec_err!r}, Plancherel {planch!r}")


def _maximal_task(item):
    fld, f, eps_set, n_t, rows = item
    return maximal_Mv(fld, f, eps_set, n_t, row_range=rows)


def _scenario_maximal(cfg: ExperimentConfig, w: _Writer) -> None:
    p = cfg.resolved_params()
    fld = cfg.field_spec()
    grid = RasterGrid.covering(fld.domain, cfg.grid_n())
    kind = p["f"]
    if kind == "bump":
        c = np.array([(fld.domain[0] + fld.domain[1]) / 2, (fld.domain[2] + fld.domain[3]) / 2])
        r = 0.1 * (fld.domain[1] - fld.domain[0])
        f = GridFunction.from_callable(grid, lambda x, y: ((x - c[0]) ** 2 + (y - c[1]) ** 2 <= r * r).astype(float))
    elif kind == "random":
        f = GridFunction(grid, cfg.rng(1).random(grid.shape))
    else:
        raise ConfigError(f"params.f: unknown test function {kind!r}; expected 'bump' or 'random'")
    ny = grid.shape[0]
    step = 16
    items = [(fld, f, cfg.eps, cfg.n_t, (r0, min(r0 + step, ny))) for r0 in range(0, ny, step)]
    parts = _pmap(_maximal_task, items, cfg.workers)
    vals = np.zeros(grid.shape)
    for (_, _, _, _, (r0, r1)), part in zip(items, parts):
        vals[r0:r1] = part.values[r0:r1]
    Mf = GridFunction(grid, vals)
    w.bytes("Mv.vfgf", Mf.to_bytes())
    w.json("maximal.json", {"schema": "vfmax.maximal/1", "field": fld.label, "eps": cfg.eps,
                            "norm2_f": f.norm2(), "norm2_Mf": Mf.norm2(),
                            "ratio_lower_estimate": Mf.norm2() / f.norm2() if f.norm2() else 0.0})
    part = omega_partition(fld, min(cfg.eps), grid, cfg.n_t)
    w.json("omega.json", {
        "schema": "vfmax.omega/1",
        "grid": grid.to_dict(),
        "eps": part.eps,
        "cells": [[int(i), int(j), int(part.s_index[i, j])] for s, m in sorted(part.bins.items()) for i, j in m.indices()],
        "degenerate": [[int(i), int(j)] for i, j in part.degenerate.indices()],
    })


def weak_type_function(kind: str, grid: RasterGrid, rng: np.random.Generator) -> GridFunction:
    """Test functions for weak-type runs: one cell, three separated cells, or sparse random."""
    ny, nx = grid.shape
    vals = np.zeros(grid.shape)
    if kind == "one-cell":
        vals[ny // 2, nx // 2] = 1.0
    elif kind == "three-cells":
        for fi, fj in ((0.25, 0.25), (0.5, 0.75), (0.75, 0.4)):
            vals[int(fi * ny), int(fj * nx)] = 1.0
    elif kind == "sparse":
        k = 24
        idx = rng.choice(ny * nx, size=k, replace=False)
        vals.ravel()[idx] = rng.uniform(0.1, 1.0, k)
    else:
        raise ConfigError(f"params.f: unknown weak-type function {kind!r}")
    return GridFunction(grid, vals)


def _scenario_weak_type(cfg: ExperimentConfig, w: _Writer) -> None:
    p = cfg.resolved_params()
    fld = cfg.field_spec()
    grid = RasterGrid.covering(fld.domain, cfg.grid_n())
    f = weak_type_function(p["f"], grid, cfg.rng(1))
    fam = build_family(fld, grid, delta=p["delta"], theta=p["theta"], stride=p["stride"], n_alpha=p["n_alpha"],
                       width_factors=p["width_factors"], seed=cfg.seed,
                       centers=grid.center_of(*np.nonzero(f.values)), aligned=True)
    Mf = tilde_maximal(f, fam)
    curve = weak_type_curve(Mf, f, cfg.lambdas)
    bound = 100.0 / p["delta"]
    w.csv("lambda_curve.csv", ["lambda", "measure", "ratio"], zip(curve.lambdas, curve.measures, curve.ratios))
    w.json("weak_type.json", {"schema": "vfmax.weak_type/1", "field": fld.label, "delta": p["delta"],
                              "theta": p["theta"], "f": p["f"], "members": len(fam),
                              "admissible": len(fam.admissible), "ratio": curve.ratio, "bound": bound,
                              "passed": curve.ratio <= bound})
    if not curve.ratio <= bound:
        raise AuditFailure(f"weak-type ratio {curve.ratio!r} exceeds 100/delta = {bound!r}")


def _covering_task(item):
    fam_seed, n, delta, theta, max_members, chash = item
    fam = random_admissible_family(fam_seed, n, delta, theta, max_members)
    cert = covering_certificate(fam, chash)
    return cert.to_json(), cert.evidence_rows(), cert.slack()


def _scenario_covering(cfg: ExperimentConfig, w: _Writer) -> None:
    p = cfg.resolved_params()
    n_fam = int(p["families"])
    seeds = np.random.SeedSequence(cfg.seed).generate_state(n_fam, dtype=np.uint32).tolist()
    chash = cfg.hash()
    items = [(int(s), cfg.grid_n(), p["delta"], p["theta"], int(p["max_members"]), chash) for s in seeds]
    results = _pmap(_covering_task, items, cfg.workers)
    slack_rows = []
    for k, (cert_json, ev_rows, slack) in enumerate(results):
        w._path(f"certificate_{k:03d}.json").write_text(cert_json + "\n")
        w.csv(f"evidence_{k:03d}.csv", ["member", "contained_in", "slack"],
              [(r["member"], r["contained_in"], r["slack"]) for r in ev_rows])
        slack_rows += [(k, step, s) for step, s in slack.items()]
    w.csv("chain_slack.csv", ["family", "step", "slack"], slack_rows)


def _scenario_scale_sum(cfg: ExperimentConfig, w: _Writer) -> None:
    p = cfg.resolved_params()
    f = _random_f(cfg)
    kind = LogPoly(float(p["p"]))
    s_lo, s_hi = p["s_range"]
    try:
        rec = scale_sum_audit(f, kind, range(1, int(p["J"]) + 1), range(int(s_lo), int(s_hi) + 1))
    except DivergentSeriesError as exc:
        w.json("scale_sum.json", {"schema": "vfmax.scale_sum/1", "divergent": True, "message": str(exc)})
        raise AuditFailure(f"divergent weight series: {exc}") from None
    w.json("scale_sum.json", {"schema": "vfmax.scale_sum/1", "divergent": False, **rec.to_dict()})
    if not rec.passed:
        raise AuditFailure(f"scale sum {rec.lhs!r} exceeds {rec.bound!r}")


_RUNNERS = {
    "audit-decay": _scenario_audit_decay,
    "doubling": _scenario_doubling,
    "balance": _scenario_balance,
    "kernel-split": _scenario_kernel_split,
    "lp": _scenario_lp,
    "maximal": _scenario_maximal,
    "weak-type": _scenario_weak_type,
    "covering": _scenario_covering,
    "scale-sum": _scenario_scale_sum,
}


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def run_scenario(cfg: ExperimentConfig) -> RunManifest:
    """Run one scenario and write its artifacts plus ``manifest.json``.

    A failed audit still writes the manifest (status ``failed``) before the
    :class:`AuditFailure` propagates.
    """
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    w = _Writer(out)
    w.json("config.json", {k: v for k, v in cfg.to_dict().items() if k not in ExperimentConfig._RUNTIME})
    started = _now()
    status, message, err = "ok", "", None
    try:
        _RUNNERS[cfg.scenario](cfg, w)
    except (AuditFailure, RegimeError) as exc:
        status, message, err = "failed", str(exc), exc
    files = [{"path": name, "sha256": sha256_file(out / name), "bytes": (out / name).stat().st_size}
             for name in sorted(set(w.files))]
    man = RunManifest(cfg.hash(), cfg.seed, __version__, GENERATOR, cfg.scenario, cfg.workers, started, _now(),
                      files, status, message)
    (out / MANIFEST).write_text(json.dumps(man.to_dict(), indent=2, sort_keys=True) + "\n")
    if err is not None:
        raise err
    return man


# ----------------------------------------------------------------------------
# catalog and plot data


def list_catalog(as_json: bool = False) -> str:
    """The field kinds with their parameter schemas, plus the labelled catalog."""
    labels = {k: v.to_dict()["kind"] for k, v in catalog().items()}
    if as_json:
        return json.dumps({"schema": "vfmax.catalog/1", "kinds": KIND_SCHEMAS, "labels": labels},
                          indent=2, sort_keys=True)
    lines = ["field kinds:"]
    for kind, sch in KIND_SCHEMAS.items():
        params = ", ".join(f"{k}: {v}" for k, v in sch["params"].items()) or "no parameters"
        lines.append(f"  {kind:<13} {params}")
    lines.append("catalog labels: " + ", ".join(f"{k} ({v})" for k, v in labels.items()))
    return "\n".join(lines)


PLOT_KINDS = {
    "decay": "vfmax.decay_report/1",
    "weak-type": None,  # lambda_curve.csv from a weak-type run directory
    "omega": "vfmax.omega/1",
    "certificate": None,  # certificate JSON
}


def _load_schema(path: Path, expected: str) -> dict:
    d = json.loads(path.read_text())
    found = d.get("schema")
    if found != expected:
        raise SchemaError(f"{path}: schema {found!r} does not match expected {expected!r}")
    return d


def emit_plotdata(result: str | Path, kind: str, out: str | Path) -> list[Path]:
    """Flatten a result file into plot-ready CSV files in ``out``."""
    result, out = Path(result), Path(out)
    out.mkdir(parents=True, exist_ok=True)
    w = _Writer(out)
    if kind == "decay":
        d = _load_schema(result, PLOT_KINDS["decay"])
        w.csv("decay_plot.csv", ["tau", "ratio", "envelope"], zip(d["tau_grid"], d["ratios"], d["envelope"]))
    elif kind == "weak-type":
        src = result / "lambda_curve.csv" if result.is_dir() else result
        rows = list(csv.reader(src.read_text().splitlines()))
        if rows[0] != ["lambda", "measure", "ratio"]:
            raise SchemaError(f"{src}: header {rows[0]} is not lambda,measure,ratio")
        w.csv("weak_type_plot.csv", rows[0], rows[1:])
    elif kind == "omega":
        d = _load_schema(result, PLOT_KINDS["omega"])
        w.csv("omega_plot.csv", ["row", "col", "s"], d["cells"])
    elif kind == "certificate":
        d = json.loads(result.read_text())
        if "chain" not in d or "selected" not in d:
            raise SchemaError(f"{result}: not a covering certificate")
        ev = {e["member"]: e for e in d["pair_evidence"]}
        rows = []
        for m in range(d["n_members"]):
            if m in ev:
                rows.append((m, ev[m]["selected"], ev[m]["slack"]))
            elif m in d["selected"]:
                rows.append((m, m, 1 - 1 / DILATION))
        w.csv("certificate_plot.csv", ["member", "contained_in", "slack"], rows)
    else:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_KINDS)}")
    return [out / f for f in w.files]


# ----------------------------------------------------------------------------
# argument parsing


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON experiment config")
    p.add_argument("--seed", type=int, default=d, help="unsigned 64-bit seed (overrides the config)")
    p.add_argument("--out", default=d, help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, default=d, help="worker processes")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="machine-readable output on stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vfmax", description="Audits for maximal operators along vector fields.")
    parser.add_argument("--version", action="version", version=f"vfmax {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        _global_flags(sp, suppress=True)
    sp = sub.add_parser("catalog", help="list field kinds and parameter schemas")
    _global_flags(sp, suppress=True)
    sp = sub.add_parser("plotdata", help="flatten a result into plot-ready CSV")
    sp.add_argument("result", help="result file (or weak-type run directory)")
    sp.add_argument("--kind", required=True, choices=sorted(PLOT_KINDS))
    _global_flags(sp, suppress=True)
    return parser


def _load_config(args) -> ExperimentConfig:
    d: dict = {}
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
    if d.get("scenario", args.command) != args.command:
        raise ConfigError(f"scenario: config says {d['scenario']!r} but the subcommand is {args.command!r}")
    d["scenario"] = args.command
    if args.seed is not None:
        d["seed"] = args.seed
    if args.out is not None:
        d["out"] = args.out
    if args.workers is not None:
        d["workers"] = args.workers
    try:
        return ExperimentConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "catalog":
            print(list_catalog(args.json))
            return 0
        if args.command == "plotdata":
            paths = emit_plotdata(args.result, args.kind, args.out or ".")
            print(json.dumps([str(p) for p in paths]) if args.json else "\n".join(str(p) for p in paths))
            return 0
        cfg = _load_config(args)
    except (ConfigError, SchemaError, FileNotFoundError) as exc:
        print(f"vfmax: error: {exc}", file=sys.stderr)
        return 2
    try:
        man = run_scenario(cfg)
    except (AuditFailure, RegimeError) as exc:
        print(f"vfmax: assertion failed: {exc}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps(man.to_dict(), indent=2, sort_keys=True))
    else:
        print(f"{cfg.scenario}: {man.status}, {len(man.files)} files in {cfg.out} (config {man.config_hash[:12]})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
