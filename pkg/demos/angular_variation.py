"""How fast does a field turn along its own flow lines?

Samples the angular variation of every catalog field at a few points,
fits the constant of each sublevel decay shape, and shows where the
three shapes are ordered.
"""
import numpy as np

from vfmax import angular as A
from vfmax import field as F

points = [(0.5, 0.0), (0.0, 0.5), (-0.3, 0.4)]
eps = 0.125

print(f"{'field':<10} {'sup w':>10} {'C power(1)':>12} {'C logpoly(2)':>13} {'A logpoly(1)':>13}")
for label, fld in F.catalog().items():
    profs = [p for p in A.angular_profiles(fld, points, eps) if not p.degenerate]
    if not profs:
        print(f"{label:<10} {'0 (degenerate: the field never turns)':>50}")
        continue
    c_pow = A.fit_decay_constant(profs, A.Power(1.0)).C_min
    c_log = A.fit_decay_constant(profs, A.LogPoly(2.0)).C_min
    integral = max(A.integral_condition(p, A.LogPoly(1.0)) for p in profs)
    print(f"{label:<10} {max(p.sup_w for p in profs):10.3e} {c_pow:12.4f} {c_log:13.4f} {integral:13.4f}")

# the flat field vanishes to infinite order, so no power bound survives small tau
flat = A.angular_profile(F.catalog()["flat"], (0.0, 0.3), eps)
print("\nflat field at (0, 0.3): ratio measure/tau at the smallest taus")
taus = A.DEFAULT_TAU_GRID[:4]
print("  ", np.array2string(A.sublevel_measure(flat, taus) / (eps * taus), precision=3))

t_star = A.envelope_ordering_threshold(1.0, 1.0, 0.5, 2.0)
print(f"\npower <= exp-log <= log-poly envelopes for tau below {t_star:.3e}")
for reg in (A.LogPoly(2.0), A.ExpLog(1.0, 0.5)):
    for Td in (10.0, 1e3, 1e6):
        tau = A.balance_tau(reg, Td)
        print(f"  {reg.name:<8} T*delta={Td:8.0e}  balancing tau={tau:.6e}  bound factor={A.bound_factor(reg, Td):.4f}")
