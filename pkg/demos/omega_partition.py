"""Bourgain rectangles and the dyadic partition of the domain by their widths.

For the rotation field the half-width is eps**2 |x|, so the bins are annuli;
the script prints the bin areas next to the closed-form annulus areas and
the growth from each bin to the union of its doubled rectangles.
"""
from vfmax import field as F
from vfmax import geometry as G

eps = 0.25
fld = F.rotation()
grid = G.RasterGrid.covering((-1, 1, -1, 1), 128)
part = G.omega_partition(fld, eps, grid, n_t=256)

br = G.bourgain_rectangle(fld, (0.6, 0.0), eps)
print(f"rectangle at (0.6, 0): length {br.L:.4f}, half-width {br.delta:.5f} (closed form {eps**2 * 0.6:.5f})")
# the field vanishes only at the origin, which is a cell corner here, so no cell is degenerate
print(f"{part.degenerate.count} degenerate cells\n")

print(f"{'s':>3} {'cells':>6} {'area':>8} {'annulus in box':>15} {'area of union':>14} {'growth':>7}")
for s, mask in sorted(part.bins.items()):
    lo, hi = 2.0 ** (-s - 1) / eps**2, 2.0 ** (-s) / eps**2
    # area of {lo <= |x| < hi} inside the square, by a fine raster
    fine = G.RasterGrid.covering((-1, 1, -1, 1), 1024)
    r = (fine.centers() ** 2).sum(axis=-1) ** 0.5
    annulus = float(((r >= lo) & (r < hi)).sum()) * fine.cell_area
    prime = G.omega_prime(fld, eps, s, grid, partition=part)
    print(f"{s:>3} {mask.count:>6} {mask.measure:8.4f} {annulus:15.4f} {prime.measure:14.4f} {prime.measure / mask.measure:7.3f}")
