"""How the shooting root depends on the scan window and integrator tolerance.

Every window [precision/alpha, precision] that contains the root must return
the same x20*, independently of the tolerance; windows below it must fail
cleanly rather than lock onto a jump of the closest pass.
"""

import numpy as np

from chattering.dynamics import ModelParams
from chattering.fuller import ALPHA
from chattering.integrator import IntegratorSettings
from chattering.synthesis import ShootingError, _miss, shoot

params = ModelParams(10.0)
X_init = (0.0, 1.0, 0.0)

print(f"{'precision':>10} {'rel_tol':>8} {'x20*':>12} {'tau':>9} {'t_f':>9} {'cost':>10} {'sw':>3} {'miss':>8}")
for precision in (1e-3 / ALPHA, 5e-4, 6e-4, 1e-3, 2e-3):
    for rel_tol in (1e-11, 1e-12, 1e-13):
        try:
            r = shoot(X_init, precision, params, IntegratorSettings(rel_tol=rel_tol))
        except ShootingError as exc:
            print(f"{precision:10.3e} {rel_tol:8.0e}  no root: {exc}", flush=True)
            continue
        print(f"{precision:10.3e} {rel_tol:8.0e} {r.x20_star:12.5e} {r.tau:9.5f} {r.t_f:9.5f} "
              f"{r.cost:10.6f} {r.n_switchings:3d} {r.terminal_miss:8.1e}", flush=True)

# signed miss along the seed axis: one zero crossing, plus a jump where the closest pass changes
print("x20, signed miss, approach time")
for x in np.geomspace(5e-5, 2e-3, 17):
    app, _ = _miss(x, np.asarray(X_init), params, IntegratorSettings(), 4.0, -0.5)
    print(f"{x:.4e} {app.signed:+.4e} {app.t:+.4f}")
