"""Spectra of the preconditioned velocity block and Schur complement at m=2, p=4.

Each hyper-power update maps every eigenvalue λ to 2λ - λ², so once the
spectrum of the initial preconditioned operator lies in (0, 2) the smallest
eigenvalue approaches 1 quadratically.

Run: python3 demos/02_spectra.py
"""

from hyperpower.bench import RunConfig, run_spectra

res = run_spectra(RunConfig(mesh=2, degree=4, updates=4))
print(f"penalty C_pen = {res['config']['cpen']:g}")
for name, reps in res["sequences"].items():
    print(f"\n{name}")
    print("  k   lambda_min    lambda_max    kappa")
    for r in reps:
        print(f"  {r['level']}   {r['lambda_min']:.6f}    {r['lambda_max']:.8f}    {r['kappa']:.4f}")

print()
for name, led in res["checks"].items():
    print(f"{'PASS' if led['passed'] else 'FAIL'}  {name}")
print("\nhat vs exact, max relative eigenvalue deviation per level:",
      ", ".join(f"{d:.3g}" for d in res["checks"]["hat-vs-exact"]["max_rel_deviation"]))
