"""Gaussian-weighted functionals on two explicit parabolic solutions.

The caloric function u = x is invariant under parabolic scaling with
degree 1, so Psi-minus vanishes for every r. The spatially constant
u = e^t solves u_t - u_xx = u and shows the identity on a nonzero value.

    python3 demos/heat_layers.py
"""

from monotone import geometry as geo, parabolic as P, solvers as S

T = 0.25
space = geo.CartesianGrid((-8.0,), (8.0,), (801,))
stgrid = geo.SpaceTimeGrid.from_step(space, 0.0, 2 * T, 1e-4)

cal = S.exact_solution("caloric_linear", stgrid)
print("u = x, beta = 1")
for r in (0.05, 0.1, 0.2):
    minus = P.psi(cal, cal.model, T, [0.0], 1.0, r)
    plus = P.psi(cal, cal.model, T, [0.0], 1.0, r, side="plus")
    print(f"  r={r:<5} Psi- = {minus.value: .3e}   Psi+ = {plus.value: .6f}"
          f"   tail bound {minus.trunc_bound:.1e}")

grow = S.exact_solution("exp_growth", stgrid)
print("\nu = e^t, beta = 2")
for side in ("minus", "plus"):
    rep = P.verify_monotonicity_parabolic(grow, grow.model, T, [0.0], 2.0, 0.05, 0.2,
                                          side=side, n_quad_r=8)
    print(f"  {side:5}  Psi(0.2) - Psi(0.05) = {rep.lhs: .6e}   integral of the derivative "
          f"= {rep.rhs: .6e}   gap {rep.residual:.2e} (tol {rep.tolerance:.1e})")

scan = P.psi_scan(grow, grow.model, T, [0.0], 2.0, r_min=0.05, r_max=0.2, n_r=6)
print("\n  r      Psi-          interior part   residual part")
for row in scan.rows:
    print(f"  {row['r']:.3f}  {row['psi']: .5e}  {row['dpsi_int']: .5e}  {row['dpsi_res']: .5e}")
