"""Angular variation ``w_x(t) = |det[v(x + t v(x)), v(x)]|`` and its audits.

A profile samples ``w_x`` on a uniform grid of ``N_t + 1`` points spanning
``[-eps, eps]``.  All measures and integrals over ``t`` use one discrete
measure: composite-trapezoid weights with the centre node ``t = 0`` given
weight zero.  ``w_x(0) = 0`` for every field, so keeping that node would make
every integral condition diverge; dropping it costs O(h) accuracy and keeps
sublevel counting and quadrature on identical weights, which makes the Markov
and layer-cake checks exact statements about that measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .errors import (
    AuditFailure,
    DegenerateProfileError,
    NumericalRangeError,
    RegimeError,
)
from .field import DomainError, FieldSpec

__all__ = [
    "DEFAULT_TAU_GRID",
    "AngularProfile",
    "SublevelCurve",
    "Power",
    "ExpLog",
    "LogPoly",
    "IterLog",
    "decay_from_dict",
    "DecayReport",
    "angular_profile",
    "angular_profiles",
    "sublevel_measure",
    "fit_decay_constant",
    "integral_condition",
    "markov_transfer",
    "layer_cake_reverse",
    "doubling_check",
    "kernel_split_audit",
    "balance_tau",
    "bound_factor",
    "envelope_ordering_threshold",
    "tau_grid",
]


def tau_grid(n=64, lo=1e-9, hi=1 - 1e-6) -> np.ndarray:
    """Log-spaced audit grid for the sublevel parameter."""
    return np.geomspace(lo, hi, n)


DEFAULT_TAU_GRID = tau_grid()
DEFAULT_NT = 2048


def _t_grid(eps: float, n_t: int) -> np.ndarray:
    return np.linspace(-eps, eps, n_t + 1)


def measure_weights(eps: float, n_t: int) -> np.ndarray:
    """Trapezoid weights on the profile grid, zero at ``t = 0``."""
    h = 2.0 * eps / n_t
    wts = np.full(n_t + 1, h)
    wts[0] = wts[-1] = 0.5 * h
    wts[n_t // 2] = 0.0
    return wts


@dataclass(frozen=True, eq=False)
class AngularProfile:
    """Sampled angular variation of a field at base point ``x`` and scale ``eps``."""

    x: np.ndarray
    eps: float
    v_at_x: np.ndarray
    t_samples: np.ndarray
    w_values: np.ndarray
    sup_w: float = dc_field(init=False)
    argmax_t: float = dc_field(init=False)

    def __post_init__(self):
        n = len(self.t_samples) - 1
        if n % 2 or len(self.w_values) != n + 1:
            raise ValueError("profile needs an odd number of samples (N_t even) matching t_samples")
        if np.any(self.w_values < 0):
            raise ValueError("angular variation must be nonnegative")
        i = int(np.argmax(self.w_values))
        object.__setattr__(self, "sup_w", float(self.w_values[i]))
        object.__setattr__(self, "argmax_t", float(self.t_samples[i]))

    @classmethod
    def from_values(cls, w_values, eps, x=(0.0, 0.0), v_at_x=(1.0, 0.0)) -> "AngularProfile":
        """Wrap raw samples of ``w`` on the uniform grid over ``[-eps, eps]``."""
        w = np.asarray(w_values, dtype=float)
        return cls(np.asarray(x, float), float(eps), np.asarray(v_at_x, float), _t_grid(eps, len(w) - 1), w)

    @property
    def n_t(self) -> int:
        return len(self.t_samples) - 1

    @property
    def step(self) -> float:
        return 2.0 * self.eps / self.n_t

    @property
    def degenerate(self) -> bool:
        return self.sup_w == 0.0

    @property
    def weights(self) -> np.ndarray:
        return measure_weights(self.eps, self.n_t)

    @property
    def ratios(self) -> np.ndarray:
        """``w / sup w``; raises for degenerate profiles."""
        if self.degenerate:
            raise DegenerateProfileError(f"degenerate profile at x={tuple(self.x)}, eps={self.eps}")
        return self.w_values / self.sup_w

    @property
    def v_norm(self) -> float:
        return float(np.hypot(*self.v_at_x))


def angular_profiles(field: FieldSpec, xs, eps: float, n_t: int = DEFAULT_NT) -> list[AngularProfile]:
    """Profiles for many base points at one scale (vectorised over points).

    Only the segments ``x + t v(x)``, ``|t| <= eps`` must stay inside the padded
    box; ``eps <= epsilon0`` is sufficient for that but not enforced.
    """
    if n_t < 64 or n_t % 2:
        raise ValueError(f"N_t must be even and >= 64, got {n_t}")
    if not eps > 0:
        raise ValueError("eps must be positive")
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    t = _t_grid(eps, n_t)
    vx = field.evaluate(xs)
    ys = xs[:, None, :] + t[None, :, None] * vx[:, None, :]
    try:
        vy = field.evaluate(ys)
    except DomainError as exc:
        raise DomainError(f"segment leaves the padded box at scale eps={eps}: {exc}") from None
    w = np.abs(vy[..., 0] * vx[:, None, 1] - vy[..., 1] * vx[:, None, 0])
    return [AngularProfile(xs[i].copy(), float(eps), vx[i].copy(), t, w[i]) for i in range(len(xs))]


def angular_profile(field: FieldSpec, x, eps: float, n_t: int = DEFAULT_NT) -> AngularProfile:
    """Sample ``w_x(t)`` on ``N_t + 1`` points of ``[-eps, eps]``."""
    return angular_profiles(field, [x], eps, n_t)[0]


@dataclass(frozen=True, eq=False)
class SublevelCurve:
    """``tau -> |{t : w(t) < tau sup w}|`` for one profile."""

    source: AngularProfile
    sorted_ratios: np.ndarray = dc_field(init=False, repr=False)
    cumulative: np.ndarray = dc_field(init=False, repr=False)

    def __post_init__(self):
        r = self.source.ratios
        order = np.argsort(r, kind="stable")
        cum = np.concatenate([[0.0], np.cumsum(self.source.weights[order])])
        object.__setattr__(self, "sorted_ratios", r[order])
        object.__setattr__(self, "cumulative", cum)

    def measure_of(self, tau):
        idx = np.searchsorted(self.sorted_ratios, tau, side="left")
        out = self.cumulative[idx]
        return float(out) if np.ndim(out) == 0 else out


def sublevel_measure(curve, tau):
    """Measure of ``{t in [-eps, eps] : w(t) < tau sup w}`` (vectorised in ``tau``).

    Accepts a :class:`SublevelCurve` or an :class:`AngularProfile`.  Raises
    :class:`DegenerateProfileError` when ``sup w = 0``.
    """
    if isinstance(curve, AngularProfile):
        curve = SublevelCurve(curve)
    tau_arr = np.asarray(tau, dtype=float)
    if np.any((tau_arr <= 0) | (tau_arr >= 1)):
        raise ValueError("tau must lie in (0, 1)")
    return curve.measure_of(tau)


# -- decay shapes -----------------------------------------------------------------


def _log_inv(tau):
    return -np.log(np.asarray(tau, dtype=float))


@dataclass(frozen=True)
class Power:
    """Envelope ``tau**c0``; as an integrand ``r**(-c0)``."""

    c0: float
    name = "power"

    def envelope(self, tau):
        return np.asarray(tau, dtype=float) ** self.c0

    def integrand(self, r):
        return np.asarray(r, dtype=float) ** (-self.c0)

    @property
    def exponents(self):
        return {"c0": self.c0}


@dataclass(frozen=True)
class ExpLog:
    """Envelope ``exp(-sigma log(1/tau)**c1)``."""

    sigma: float
    c1: float
    name = "explog"

    def envelope(self, tau):
        return np.exp(-self.sigma * _log_inv(tau) ** self.c1)

    def integrand(self, r):
        return np.exp(self.sigma * _log_inv(r) ** self.c1)

    @property
    def exponents(self):
        return {"sigma": self.sigma, "c1": self.c1}


@dataclass(frozen=True)
class LogPoly:
    """Envelope ``log(1/tau)**(-p)``; as an integrand ``(-log r)**p``."""

    p: float
    name = "logpoly"

    def envelope(self, tau):
        return _log_inv(tau) ** (-self.p)

    def integrand(self, r):
        return _log_inv(r) ** self.p

    @property
    def exponents(self):
        return {"p": self.p}


@dataclass(frozen=True)
class IterLog:
    """Iterated-log envelope of the given depth.

    depth 2: ``1 / (log(1/tau) * loglog(1/tau)**p)``; depth 1 is :class:`LogPoly`.
    Where an iterated logarithm is not positive the envelope is ``+inf`` (the
    condition imposes nothing there).
    """

    p: float
    depth: int = 2
    name = "iterlog"

    def envelope(self, tau):
        logs = [_log_inv(tau)]
        with np.errstate(invalid="ignore", divide="ignore"):
            for _ in range(self.depth - 1):
                prev = logs[-1]
                logs.append(np.log(np.where(prev > 0, prev, np.nan)))
            ok = np.logical_and.reduce([lg > 0 for lg in logs])
            denom = np.prod(logs[:-1], axis=0) * logs[-1] ** self.p
            return np.where(ok, 1.0 / np.where(ok, denom, 1.0), np.inf)

    def integrand(self, r):
        raise ValueError("iterated-log decay has no integral form here")

    @property
    def exponents(self):
        return {"p": self.p, "depth": self.depth}


def decay_from_dict(d) -> Power | ExpLog | LogPoly | IterLog:
    kinds = {"power": Power, "explog": ExpLog, "logpoly": LogPoly, "iterlog": IterLog}
    name = d["kind"]
    if name not in kinds:
        raise KeyError(f"decay.kind: unknown decay kind {name!r}; expected one of {sorted(kinds)}")
    return kinds[name](**d.get("exponents", {}))


# -- decay audits -----------------------------------------------------------------


@dataclass
class DecayReport:
    """Smallest constant making a sublevel decay bound hold on the audited set."""

    kind: Power | ExpLog | LogPoly | IterLog
    C_min: float
    witnesses: list
    tau_grid: np.ndarray
    ratios: np.ndarray  # per-tau maximum over profiles

    def to_dict(self) -> dict:
        return {
            "schema": "vfmax.decay_report/1",
            "kind": self.kind.name,
            "exponents": self.kind.exponents,
            "C_min": self.C_min,
            "witnesses": [
                {"x1": float(x[0]), "x2": float(x[1]), "eps": eps, "tau": tau} for x, eps, tau in self.witnesses
            ],
            "tau_grid": [float(t) for t in self.tau_grid],
            "ratios": [float(r) for r in self.ratios],
            "envelope": [float(e) for e in self.kind.envelope(self.tau_grid)],
        }


def _check_tau_grid(taus):
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or len(taus) < 32:
        raise ValueError("tau grid needs at least 32 points")
    if np.any(taus <= 0) or np.any(taus >= 1 - 1e-6 + 1e-15):
        raise ValueError("tau grid must lie in (0, 1 - 1e-6]")
    return taus


def decay_ratios(profile: AngularProfile, kind, taus) -> np.ndarray:
    """``measure(tau) / (envelope(tau) * eps)`` on a tau grid."""
    meas = SublevelCurve(profile).measure_of(taus)
    env = kind.envelope(taus)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.isinf(env), 0.0, meas / (env * profile.eps))
    return ratio


def fit_decay_constant(profiles: Sequence[AngularProfile], kind, taus=None) -> DecayReport:
    """Smallest ``C`` with ``measure(tau) <= C envelope(tau) eps`` on the audited grid."""
    taus = _check_tau_grid(DEFAULT_TAU_GRID if taus is None else taus)
    for i, prof in enumerate(profiles):
        if prof.degenerate:
            raise DegenerateProfileError(f"profile {i} is degenerate (sup w = 0)", index=i)
    if not profiles:
        raise ValueError("no profiles to audit")
    table = np.array([decay_ratios(p, kind, taus) for p in profiles])
    c_min = float(table.max())
    witnesses = []
    if c_min > 0:
        for i, j in zip(*np.nonzero(table == c_min)):
            prof = profiles[i]
            witnesses.append((tuple(float(c) for c in prof.x), prof.eps, float(taus[j])))
    return DecayReport(kind, c_min, witnesses, taus, table.max(axis=0))


def integral_condition(profile: AngularProfile, kind) -> float:
    """Normalised integral ``(1/2eps) * int Phi(w / sup w) dt`` of an integral condition.

    ``Phi`` is the kind's integrand (``r**-sigma``, ``exp(sigma (-log r)**c1)``
    or ``(-log r)**q``).  Returns ``math.inf`` (divergence) if ``w`` vanishes at
    a node of positive weight.
    """
    r = profile.ratios
    wts = profile.weights
    live = wts > 0
    if np.any(r[live] == 0.0):
        return math.inf
    vals = kind.integrand(r[live])
    return float(np.dot(wts[live], vals) / (2.0 * profile.eps))


@dataclass
class MarkovRecord:
    taus: np.ndarray
    measures: np.ndarray
    bounds: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.measures <= self.bounds))


def markov_transfer(profile: AngularProfile, kind, A: float, taus=None) -> MarkovRecord:
    """Check ``measure(tau) <= 2 eps A envelope(tau)`` at every audited ``tau``.

    This is Chebyshev's inequality for the discrete measure, so it must hold
    with zero tolerance.  Raises :class:`AuditFailure` on the first violation.
    """
    if not math.isfinite(A):
        raise ValueError("A must be the finite value of integral_condition for this profile")
    taus = np.asarray(DEFAULT_TAU_GRID if taus is None else taus, dtype=float)
    meas = SublevelCurve(profile).measure_of(taus)
    bounds = 2.0 * profile.eps * A * kind.envelope(taus)
    rec = MarkovRecord(taus, np.asarray(meas), bounds)
    bad = np.nonzero(rec.measures > rec.bounds)[0]
    if len(bad):
        j = bad[0]
        raise AuditFailure(
            f"Markov bound violated at tau={taus[j]!r}: measure {rec.measures[j]!r} > bound {bounds[j]!r}"
        )
    return rec


@dataclass
class LayerCakeRecord:
    integral: float
    bound: float
    p: float
    q: float
    C: float

    @property
    def passed(self) -> bool:
        return self.integral <= self.bound


def layer_cake_bound(C: float, p: float, q: float) -> float:
    """``int_0^inf q L**(q-1) min(1, C L**-p) dL = C**(q/p) p/(p-q)``."""
    return C ** (q / p) * p / (p - q)


def layer_cake_reverse(profile: AngularProfile, p: float, q: float, C: float) -> LayerCakeRecord:
    """Check ``integral_condition(logpoly(q)) <= C**(q/p) p / (p - q)``.

    ``(C, p)`` must certify the log-polynomial sublevel bound for ``profile``.
    """
    if not 1 < q < p:
        raise ValueError(f"need 1 < q < p, got q={q}, p={p}")
    val = integral_condition(profile, LogPoly(q))
    rec = LayerCakeRecord(val, layer_cake_bound(C, p, q), p, q, C)
    if not rec.passed:
        raise AuditFailure(f"layer-cake bound violated: {val!r} > {rec.bound!r} (p={p}, q={q}, C={C})")
    return rec


@dataclass
class DoublingResult:
    sup_2eps: float
    sup_eps: float
    tau0: float
    passed: bool

    @property
    def ratio(self) -> float:
        if self.sup_eps == 0:
            return 1.0 if self.sup_2eps == 0 else math.inf
        return self.sup_2eps / self.sup_eps


def doubling_tau0(C: float, p: float) -> float:
    """``exp(-(2C)**(1/p))``, so that ``C log(1/tau0)**-p = 1/2``."""
    return math.exp(-((2.0 * C) ** (1.0 / p)))


def doubling_check(field: FieldSpec, x, eps: float, C: float, p: float, n_t: int = DEFAULT_NT) -> DoublingResult:
    """Compare ``sup_[-2eps,2eps] w`` with ``sup_[-eps,eps] w / tau0``."""
    s1 = angular_profile(field, x, eps, n_t).sup_w
    s2 = angular_profile(field, x, 2 * eps, n_t).sup_w
    tau0 = doubling_tau0(C, p)
    if s1 == 0:
        passed = s2 == 0
    else:
        passed = s2 <= s1 / tau0
    return DoublingResult(s2, s1, tau0, bool(passed))


@dataclass
class KernelSplitRecord:
    lhs: float
    taus: np.ndarray
    term1: np.ndarray
    term2: np.ndarray
    a: float


def kernel_split_audit(profile: AngularProfile, T: float, v0_norm: float, taus=None) -> KernelSplitRecord:
    """Audit ``int (1 + a w)**-2 dt <= |{w < tau sup}| + 2 eps (a tau sup)**-2``.

    ``a = eps T / v0_norm``.  Pointwise the integrand is at most 1 on the
    sublevel set and at most ``(a tau sup)**-2`` off it; the complement has
    measure at most ``2 eps``, hence the factor 2 in the second term.
    """
    if profile.degenerate:
        raise DegenerateProfileError("kernel split needs a non-degenerate profile")
    a = profile.eps * T / v0_norm
    if not a * profile.sup_w > 1:
        raise RegimeError(f"need T*delta = a*sup_w > 1, got {a * profile.sup_w!r}")
    taus = np.asarray(DEFAULT_TAU_GRID if taus is None else taus, dtype=float)
    lhs = float(np.dot(profile.weights, (1.0 + a * profile.w_values) ** -2.0))
    term1 = np.asarray(SublevelCurve(profile).measure_of(taus))
    term2 = 2.0 * profile.eps * (a * taus * profile.sup_w) ** -2.0
    bad = np.nonzero(lhs > term1 + term2)[0]
    if len(bad):
        j = bad[0]
        raise AuditFailure(f"kernel split violated at tau={taus[j]!r}: {lhs!r} > {term1[j]!r} + {term2[j]!r}")
    return KernelSplitRecord(lhs, taus, term1, term2, a)


# -- balancing and decay factors --------------------------------------------------


def _balance_residual(regime, Tdelta, tau):
    x = float(tau) * Tdelta
    if x < 1e-150:
        return -math.inf  # (tau Tdelta)**-2 exceeds the float range; the envelope is at most 1
    return float(regime.envelope(tau)) - x**-2.0


def _log_balance(regime, Tdelta, u):
    # log(envelope) + 2 log(tau Tdelta) at tau = exp(u); same sign as the residual
    L = -u
    if isinstance(regime, ExpLog):
        log_env = -regime.sigma * L**regime.c1
    else:
        log_env = -regime.p * math.log(L)
    return log_env + 2.0 * (u + math.log(Tdelta))


def balance_tau(regime: ExpLog | LogPoly, Tdelta: float, max_iter: int = 400) -> float:
    """Root in ``(0, 1)`` of ``envelope(tau) = (tau * Tdelta)**-2`` by bisection.

    The envelope increases in ``tau`` and the right side decreases, so the
    root is unique.  Bisection runs on ``log tau`` until the bracket stops
    shrinking in floating point.
    """
    if not isinstance(regime, (ExpLog, LogPoly)):
        raise ValueError("balance_tau supports explog and logpoly regimes")
    if not Tdelta > 1 + 1e-9:
        raise RegimeError(f"need Tdelta > 1, got {Tdelta!r}")
    lo, hi = math.log(1e-300), math.log1p(-1e-12)
    g_lo = _log_balance(regime, Tdelta, lo)
    g_hi = _log_balance(regime, Tdelta, hi)
    if not (g_lo < 0 < g_hi):
        raise NumericalRangeError(f"no sign change on (1e-300, 1-1e-12): g={g_lo!r}, {g_hi!r}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        g_mid = _log_balance(regime, Tdelta, mid)
        if g_mid == 0:
            lo = hi = mid
            break
        if g_mid < 0:
            lo = mid
        else:
            hi = mid
    # the bracket has collapsed to adjacent floats; keep the smaller residual
    cands = [math.exp(lo), math.exp(hi)]
    return min(cands, key=lambda t: abs(_balance_residual(regime, Tdelta, t)))


def balance_residual(regime, Tdelta: float, tau: float) -> float:
    return _balance_residual(regime, Tdelta, tau)


def bound_factor(regime: ExpLog | LogPoly, Tdelta: float, C: float = 1.0) -> float:
    """Single-scale decay factor ``exp(-sigma' log(Tdelta)**c1)`` or ``log(C Tdelta)**-p``."""
    if not Tdelta > 1:
        raise RegimeError(f"need Tdelta > 1, got {Tdelta!r}")
    if isinstance(regime, ExpLog):
        return math.exp(-regime.sigma * math.log(Tdelta) ** regime.c1)
    if isinstance(regime, LogPoly):
        arg = C * Tdelta
        if not arg > 1:
            raise RegimeError(f"need C*Tdelta > 1, got {arg!r}")
        return math.log(arg) ** (-regime.p)
    raise ValueError("bound_factor supports explog and logpoly regimes")


def envelope_ordering_threshold(c0: float, sigma: float, c1: float, p: float) -> float:
    """Largest ``tau*`` with ``tau**c0 <= exp(-sigma L**c1) <= L**-p`` for all ``tau <= tau*``.

    Here ``L = log(1/tau)`` and ``0 < c1 < 1``.  The first inequality holds for
    ``L >= (sigma/c0)**(1/(1-c1))``.  For the second, ``sigma L**c1 - p log L``
    decreases up to ``L_m = (p/(sigma c1))**(1/c1)`` and increases after it, so
    its last zero is found by bisection on ``[L_m, inf)``.
    """
    if not 0 < c1 < 1:
        raise ValueError("ordering needs 0 < c1 < 1")
    l_first = (sigma / c0) ** (1.0 / (1.0 - c1))

    def h(L):
        return sigma * L**c1 - p * math.log(L)

    l_m = (p / (sigma * c1)) ** (1.0 / c1)
    if h(l_m) >= 0:
        l_second = 0.0
    else:
        lo, hi = l_m, 2.0 * l_m
        while h(hi) < 0:
            hi *= 2.0
            if hi > 1e300:
                raise NumericalRangeError("ordering threshold out of range")
        for _ in range(2000):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if h(mid) < 0:
                lo = mid
            else:
                hi = mid
        l_second = hi
    return math.exp(-max(l_first, l_second))
