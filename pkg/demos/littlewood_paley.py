"""Dyadic frequency bands, the mollified cutoff and one single-scale measurement."""
import numpy as np

from vfmax import field as F, operators as O
from vfmax.geometry import RasterGrid, bourgain_rectangle, dilate, rasterize

grid = RasterGrid.covering((0, 1, 0, 1), 512)
f = O.GridFunction(grid, np.random.default_rng(2024).normal(size=grid.shape))
dec = O.lp_decompose(f)
print("band energies (sum equals ||f||^2 =", f"{f.norm2() ** 2:.6f}):")
for key, e in dec.energies.items():
    print(f"   {str(key):>4}: {e:.6f}")
print(f"reconstruction error {np.max(np.abs(dec.reconstruct().values - f.values)):.2e}")

fld = F.rotation(domain=(0, 1, 0, 1))
br = bourgain_rectangle(fld, (0.8, 0.8), 2**-4)
cut = O.mollified_cutoff(rasterize(dilate(br.rect, 2), grid), 256.0)
print(f"\nrectangle at (0.8, 0.8): delta={br.delta:.5f}; cutoff at its centre {cut.values[409, 409]:.4f}")
print(f"{'T':>6} {'T delta':>8} {'lhs':>10} {'factor':>8} {'rhs core':>10} {'ratio':>8}")
for T in (2**6, 2**7, 2**8):
    if T * br.delta <= 1:
        print(f"{T:>6} {T * br.delta:8.3f}   outside the regime T delta > 1")
        continue
    rec = O.single_scale_audit(fld, dec.band(T), br, float(T))
    print(f"{T:>6} {rec.Tdelta:8.3f} {rec.lhs:10.4e} {rec.factor:8.4f} {rec.rhs_core:10.4e} {rec.ratio:8.4f}")
