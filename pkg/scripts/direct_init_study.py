"""Direct-method convergence study under different initializations.

Compares the PMP-sampled warm start with the all-zero start, both with
penalty continuation, and prints gap and terminal distance against N.
"""

import numpy as np

from chattering import direct
from chattering.dynamics import ModelParams
from chattering.synthesis import forward_control, shoot

ref = shoot((0.0, 1.0, 0.0), 1e-3, ModelParams(10.0))
u_ref = forward_control(ref)
print(f"reference cost {ref.cost:.10f}, t_f {ref.t_f:.6f}")
for label in ("pmp", "zero"):
    print(f"-- init={label}")
    for N in (50, 100, 200, 400):
        prob = direct.DirectProblem(N=N)
        init = direct.sample_control(u_ref, prob) if label == "pmp" else None
        sol = direct.solve_continuation(prob, init=init)
        print(f"N={N:4d} cost={sol.cost_running:.8f} gap={abs(sol.cost_running - ref.cost):.3e} "
              f"distance={sol.terminal_distance:.3e} iterations={sol.iterations} converged={sol.converged} "
              f"sign changes first/last 10%: {sol.sign_changes(0, .1)}/{sol.sign_changes(.9, 1)}", flush=True)

print("-- penalty sweep, N=100, pmp start")
prob = direct.DirectProblem(N=100)
u = direct.sample_control(u_ref, prob)
for mu in (10.0, 100.0, 1000.0):
    sol = direct.solve_continuation(direct.DirectProblem(N=100, mu=mu), init=u)
    print(f"mu={mu:7.0f} distance={sol.terminal_distance:.3e} cost={sol.cost_running:.8f}")
