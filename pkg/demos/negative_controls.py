"""What the checks do with data that is not a solution.

Random nodal values fail both integral identities by a wide margin and are
refused by the monotonicity check. The boundary part of dPhi/dr is a sum of
squares, so it stays non-negative even on noise.

    python3 demos/negative_controls.py
"""

import numpy as np

from monotone import elliptic as E, geometry as geo, models as M
from monotone.errors import FieldNotSolutionError
from monotone.fields import noise_field

grid = geo.CartesianGrid((-4.0,), (4.0,), (2001,))
noise = noise_field(grid, seed=1)
model = M.helmholtz(0.0)

for r in (0.5, 1.0):
    rep = E.ibp_report(noise, model, [0.25], r)
    print(f"r={r}: ibp residual {rep.residual:.3e} is {rep.residual / rep.tolerance:.0f}x the tolerance")

try:
    E.verify_monotonicity_elliptic(noise, model, [0.25], 2.0, 0.2, 1.0)
except FieldNotSolutionError as exc:
    print("refused:", exc)

bd = [E.phi_derivative_decomposition(noise, model, [0.25], 2.0, r)[0]
      for r in np.linspace(0.1, 2.0, 8)]
print("boundary part on noise:", " ".join(f"{b:.2e}" for b in bd))
