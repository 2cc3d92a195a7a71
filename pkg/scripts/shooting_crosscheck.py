"""Replay the shooting root with scipy's DOP853 and event detection.

Independent of the in-house integrator: starting from the seed adjoint at
x20*, integrate the extremal system backward with bang controls switched at
zeros of Phi, and report how close the state gets to the initial point.
"""

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from chattering.dynamics import ModelParams, extremal_rhs, switching_fn
from chattering.synthesis import seed_adjoint, seed_controls, shoot

params = ModelParams(10.0)
X_init = np.array([0.0, 1.0, 0.0])
res = shoot(X_init, 1e-3, params)
seed = seed_adjoint(res.x20_star, params)
u = seed_controls(res.x20_star)[0]

y = np.concatenate([seed.X0, seed.P0, [0.0]])
t, t_end = 0.0, -res.tau - 0.05
best = (np.inf, None)
n_sw = 0
while t > t_end:
    # arcs start on Phi = 0; only a drop of u*Phi below zero ends an arc
    def phi(_t, z, u=u):
        return u * switching_fn(z[:3], z[3:6])
    phi.terminal, phi.direction = True, -1
    sol = solve_ivp(lambda _t, z, u=u: extremal_rhs(z, u, params), (t, t_end), y, method="DOP853",
                    rtol=1e-12, atol=1e-24, events=phi, dense_output=True)
    ts = np.linspace(sol.t[0], sol.t[-1], 4000)
    d = np.linalg.norm(sol.sol(ts)[:3].T - X_init, axis=1)
    k = int(np.argmin(d))
    lo, hi = sorted((ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]))
    opt = minimize_scalar(lambda s, sol=sol: np.linalg.norm(sol.sol(s)[:3] - X_init),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
    if opt.fun < best[0]:
        best = (float(opt.fun), float(opt.x))
    t, y = float(sol.t[-1]), sol.y[:, -1]
    if sol.status != 1:
        break
    n_sw += 1
    u = -u
print(f"in-house: x20*={res.x20_star:.6e} tau={res.tau:.6f} switchings={res.n_switchings}")
print(f"DOP853 : closest distance {best[0]:.2e} at t={best[1]:.6f}, switchings before it={n_sw} (+ seed)")
