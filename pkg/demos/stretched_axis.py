"""Build a stretched vertical axis and show its operator table.

    python3 demos/stretched_axis.py
"""

import numpy as np

from csemfd.gridgen import (
    OperatorTable,
    StretchSpec,
    StretchedSegment,
    UniformSegment,
    build_axis,
    solve_stretch_factor,
)
from csemfd.kernel import dmax

# ratio for 20 intervals starting at 1 and covering 100
r = solve_stretch_factor(StretchSpec(100.0, 1.0, 20))
print(f"stretch factor for span 100, first cell 1, 20 intervals: {r:.6f}")

# 30 fine cells through water and seafloor, then 35 cells growing to cover 3800 m
az = build_axis([UniformSegment(40.0, 30), StretchedSegment(3800.0, 35)], pml_layers=12)
print(f"\naxis: {az.n} nodes, stretch factors {[round(float(f), 5) for f in az.stretch_factors]}")
d = az.spacings
print(f"cell sizes: min {d.min():.1f} m, max {d.max():.1f} m")
for L in (1, 2, 3):
    tab = OperatorTable(az, L)
    print(f"L={L}: D_max {dmax(tab):.5f} 1/m, weights of the first stretched row "
          f"{np.round(tab.plus[30 + 12], 6)}")
