"""Lid-driven cavity: MINRES iterations and solution time for P_0 .. P_4.

The forward operator here is the Kronecker-assembled saddle matvec, which is
cheap relative to the preconditioner; solution-time ratios are therefore
higher than for a quadrature-based forward operator, while the iteration
counts are a property of the preconditioner alone.

Run: python3 demos/03_lid_driven_cavity.py [mesh] [degree]
"""

import sys

from hyperpower.bench import RunConfig, run_solve

mesh = int(sys.argv[1]) if len(sys.argv) > 1 else 8
degree = int(sys.argv[2]) if len(sys.argv) > 2 else 2
records = run_solve(RunConfig(mesh=mesh, degree=degree, updates=4))
r0 = records[0]
print(f"mesh {mesh}^3, degree {degree}: n_V={r0.n_V}, n_Q={r0.n_Q}, C_pen={r0.config.penalty:g}")
print("  k  N_iter  T_sol/T_sol(0)  T_p/T_f  true residual  ||B^T u||/||u||")
for r in records:
    print(f"  {r.level}  {r.n_iter:6d}  {r.t_sol_norm:14.2f}  {r.t_p / r.t_f:7.2f}  {r.true_residual:13.1e}  "
          f"{r.div_ratio:.1e}")
print(f"\nmeasured cost constants (flops / n_V^(4/3)): c_P={r0.c_P:.3f}, c_A={r0.c_A:.3f}, "
      f"ratio {r0.c_A / r0.c_P:.3f}")
