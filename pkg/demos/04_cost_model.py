"""Where does an update pay off? The solution-time model N_iter·T_f·(1 + T_p/T_f).

For each degree the measured (iteration ratio, cost ratio) points of the
levels k = 0..4 are placed against the model; a model ratio below one means
the more expensive preconditioner wins. A contour grid for plotting is
written to cost_model_grid.csv.

Run: python3 demos/04_cost_model.py [mesh]
"""

import sys

from hyperpower.bench import RunConfig, contour_grid, contour_points, model_ratio, run_solve, write_csv

print(f"break-even example: 67% fewer iterations at T_p/T_f = 2 -> model ratio {model_ratio(0.33, 2.0):.2f}")

mesh = int(sys.argv[1]) if len(sys.argv) > 1 else 8
rows = []
for degree in (2, 4, 6):
    recs = run_solve(RunConfig(mesh=mesh, degree=degree, updates=4))
    rows += [{k: str(v) for k, v in r.row().items()} for r in recs]

print(f"\nmesh {mesh}^3")
print("  p  k  N/N_0   T_p/T_f  model  measured")
for pt in contour_points(rows):
    print(f"  {pt['degree']}  {pt['level']}  {pt['n_ratio']:.2f}  {pt['tp_tf']:8.2f}  {pt['model_ratio']:5.2f}  "
          f"{pt['measured_ratio']:8.2f}")
write_csv(contour_grid(), "cost_model_grid.csv")
print("\nwrote cost_model_grid.csv")
