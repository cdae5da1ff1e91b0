"""Numerical audits for maximal operators along vector fields.

Modules: :mod:`~vfmax.field` (vector fields), :mod:`~vfmax.angular`
(angular variation and sublevel audits), :mod:`~vfmax.geometry` (rectangles
and rasters), :mod:`~vfmax.operators` (averages, maximal operators,
Littlewood-Paley), :mod:`~vfmax.covering` (greedy covering certificate) and
:mod:`~vfmax.cli` (experiment runner).
"""

__version__ = "0.1.0"
