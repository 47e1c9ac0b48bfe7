"""Walk through the elliptic functional on the Ginzburg-Landau kink.

u(x) = tanh(x / sqrt 2) solves u'' + u(1 - u^2) = 0 on the line. We evaluate
Phi about x0 = 0.25, check the two integral identities, and then blow the
kink up at its zero, where it looks like a line of slope 1/sqrt 2.

    python3 demos/kink_weiss.py
"""

import numpy as np

from monotone import blowup as B, elliptic as E, geometry as geo, models as M, solvers as S

grid = geo.CartesianGrid((-4.0,), (4.0,), (2001,))
model = M.ginzburg_landau(1.0)
u = S.exact_solution("gl_kink", grid)
x0 = [0.25]

print("identities on B_r(0.25)")
for r in (0.5, 1.0, 2.0):
    p = E.pohozaev_report(u, model, x0, r)
    i = E.ibp_report(u, model, x0, r)
    print(f"  r={r:4}  pohozaev {p.residual:.2e} (tol {p.tolerance:.1e})"
          f"  ibp {i.residual:.2e} (tol {i.tolerance:.1e})")

scan = E.phi_scan(u, model, x0, 2.0, 0.2, 2.0, n_r=10)
print("\nPhi scan, beta = 2")
for row in scan.rows:
    print(f"  r={row['r']:.2f}  Phi={row['phi']: .6e}  boundary part={row['dphi_bdry']:.3e}"
          f"  (C1) margin={row['c1_margin']: .3e}")
print(f"  identity residual {scan.identity_residual_max:.2e} vs {scan.identity_tolerance:.2e}")
# GL's interior integrand is negative where |u| < 1, so every radius is flagged
print(f"  inadmissible radii: {len(scan.inadmissible_radii)} of {len(scan.radii)}")

rep = B.blowup_study(u, [0.0], 1.0, [0.4, 0.2, 0.1, 0.05])
print("\nblow-up at the origin, beta = 1")
for rho, res, deg in zip(rep.scales, rep.residuals, rep.degree_estimates):
    print(f"  rho={rho:<5} homogeneity residual {res:.3e}  degree {deg:.5f}")
print(f"  beta_hat = {rep.beta_hat:.5f}, M = {rep.limit_M}")
print(f"  slope of the limit {np.sqrt(0.5):.6f}; rescaled slope at rho=0.05 "
      f"{B.rescale_elliptic(u, [0.0], 0.05, 1.0).sample_gradient([[0.0]])[0, 0, 0]:.6f}")
