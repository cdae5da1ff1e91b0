"""Empirical weak-type (1,1) ratios of the population maximal operator.

Sweeps the level lambda for a one-cell, a three-cell and a sparse random f
and prints the largest lambda |{Mf > lambda}| / ||f||_1 against 100/delta.
"""
import numpy as np

from vfmax import cli, field as F, operators as O
from vfmax.geometry import RasterGrid

fld = F.rotation(domain=(100.0, 101.0, -0.5, 0.5))
grid = RasterGrid.covering(fld.domain, 256)
rng = np.random.default_rng(0)
for kind in ("one-cell", "three-cells", "sparse"):
    f = cli.weak_type_function(kind, grid, rng)
    for delta in (0.1, 0.5):
        fam = O.build_family(fld, grid, delta=delta, theta=0.009, stride=32, n_alpha=8,
                             width_factors=(1.0, 1.25, 1.5, 1.75),
                             centers=grid.center_of(*np.nonzero(f.values)), aligned=True)
        curve = O.weak_type_curve(O.tilde_maximal(f, fam), f)
        print(f"{kind:<12} delta={delta:<4} admissible {len(fam.admissible):>4}/{len(fam):<5} "
              f"ratio {curve.ratio:7.4f}   bound {100 / delta:6.0f}")
