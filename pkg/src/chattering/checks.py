"""Fast invariant checks shared by the `verify` subcommand and the test-suite.

Each check returns a CheckResult; none takes more than a second or two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import direct, fuller
from .dynamics import (
    ModelParams,
    dynamics_rhs,
    extremal_rhs,
    full_schrodinger_rhs,
    pontryagin_hamiltonian,
    switching_derivatives,
    switching_fn,
)
from .integrator import IntegratorSettings, propagate
from .synthesis import backward_extremal, seed_adjoint, seed_residuals, verify_chattering_asymptotics


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def check_fuller_constants() -> CheckResult:
    """xi against the positive root of 36 s^2 + 3 s - 2 (s = xi^2), alpha against 4.13016."""
    c = fuller.fuller_constants()
    root = max(np.roots([36.0, 3.0, -2.0]).real)
    ok = (abs(c.xi - math.sqrt(root)) < 1e-12 and abs(c.alpha - 4.13016) < 1e-4
          and abs(c.quartic_residual) < 1e-12)
    return CheckResult("fuller-constants", ok,
                       f"xi={c.xi:.8f} alpha={c.alpha:.8f} quartic={c.quartic_residual:.2e}")


def check_fuller_recursion(n_arcs: int = 10) -> CheckResult:
    traj = fuller.fuller_trajectory(fuller.FullerState(-fuller.XI, 1.0), n_arcs)
    a = fuller.ALPHA
    T = traj.final_time
    times = [0.0] + traj.switch_times()
    states = [traj.start] + traj.switch_states()
    worst = 0.0
    for k in range(1, len(times) - 1):
        worst = max(worst, abs((T - times[k + 1]) / (T - times[k]) * a - 1.0))
    for s0, s1 in zip(states[:-1], states[1:]):
        worst = max(worst, abs(s1.x / s0.x * (-a * a) - 1.0), abs(s1.y / s0.y * (-a) - 1.0))
    # arcs integrated from their own start must land on the next switching state
    for arc in traj.arcs:
        e = arc.end
        worst = max(worst, abs(e.x - fuller.fuller_switching_curve(e.y)) / e.y**2)
    t_err = abs(T - (1 + a) / (a - 1))
    ok = worst < 1e-9 and t_err < 1e-8
    return CheckResult("fuller-recursion", ok, f"max rel ratio error {worst:.2e}, t_f error {t_err:.2e}")


def _fd_derivative(f, t, h):
    return (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h)


def check_switching_derivatives(seed: int = 7, delta: float = 10.0) -> CheckResult:
    """Closed-form Phi derivatives against 5-point differences along a bang arc."""
    rng = np.random.default_rng(seed)
    params = ModelParams(delta)
    X = rng.normal(size=3)
    X /= np.linalg.norm(X)
    P = rng.normal(size=3)
    u = 1.0
    y0 = np.concatenate([X, P, [0.0]])
    rhs = lambda t, y: extremal_rhs(y, u, params)  # noqa: E731
    ts = np.linspace(-0.04, 0.04, 81)
    # dense reference values of Phi and its closed-form derivatives along the arc
    cache = {}

    def state(t):
        if t not in cache:
            if t == 0.0:
                cache[t] = y0
            else:
                cache[t], _ = propagate(rhs, y0, 0.0, t, rtol=1e-14, atol=1e-16, max_step=1e-3)
        return cache[t]

    def deriv(k):
        return lambda t: switching_derivatives(state(t)[:3], state(t)[3:6], u, params)[k]

    h = 2e-3
    worst = 0.0
    for t in ts[20:61:10]:
        vals = switching_derivatives(state(t)[:3], state(t)[3:6], u, params)
        for k in range(1, 5):
            fd = _fd_derivative(deriv(k - 1), float(t), h)
            scale = max(abs(vals[k]), 1e-3 * (delta ** k))
            worst = max(worst, abs(fd - vals[k]) / scale)
    # target configuration: X = e3, P = 0
    e3 = np.array([0.0, 0.0, 1.0])
    zero = np.zeros(3)
    tgt = [switching_derivatives(e3, zero, s, params) for s in (-1.0, 1.0)]
    tgt_err = max(
        max(abs(v) for v in d[:4]) + abs(d[4] + s * delta**2) for d, s in zip(tgt, (-1.0, 1.0))
    )
    ok = worst < 1e-6 and tgt_err < 1e-9
    return CheckResult("switching-derivatives", ok, f"max rel FD error {worst:.2e}, target error {tgt_err:.2e}")


def check_decoupling(n: int = 10, seed: int = 3, delta: float = 10.0) -> CheckResult:
    """6D and reduced propagation over t = 1 from states with x4 = x5 = x6 = 0."""
    rng = np.random.default_rng(seed)
    params = ModelParams(delta)
    worst = 0.0
    for _ in range(n):
        X = rng.normal(size=3)
        X /= np.linalg.norm(X)
        u = float(rng.uniform(-1, 1))
        x6 = np.concatenate([X, np.zeros(3)])
        y6, _ = propagate(lambda t, y: full_schrodinger_rhs(y, u, params), x6, 0.0, 1.0,
                          rtol=1e-13, atol=1e-15, max_step=0.01)
        y3, _ = propagate(lambda t, y: dynamics_rhs(y, u, params), X, 0.0, 1.0,
                          rtol=1e-13, atol=1e-15, max_step=0.01)
        worst = max(worst, float(np.max(np.abs(y6[:3] - y3))), float(np.max(np.abs(y6[3:]))))
    return CheckResult("decoupling-6d", worst < 1e-10, f"max deviation {worst:.2e}")


def check_seed_residuals(delta: float = 10.0) -> CheckResult:
    params = ModelParams(delta)
    worst = 0.0
    for x20 in (1e-4, -3e-4, 6.9e-4, 2e-3):
        worst = max(worst, *seed_residuals(seed_adjoint(x20, params), params))
    return CheckResult("seed-residuals", worst < 1e-12, f"max |Phi|,|H|,|P.X| = {worst:.2e}")


def check_extremal_conservation(x20: float = 5.4e-4, delta: float = 10.0) -> CheckResult:
    params = ModelParams(delta)
    traj = backward_extremal(x20, params, IntegratorSettings(), t_limit=-2.6)
    rows = traj.samples()
    H = max(abs(pontryagin_hamiltonian(r[1:4], r[4:7], r[7], params)) for r in rows)
    nrm = float(np.max(np.abs(np.linalg.norm(rows[:, 1:4], axis=1) - 1.0)))
    ok = H < 1e-9 and nrm < 1e-10
    return CheckResult("extremal-conservation", ok,
                       f"max |H| {H:.2e}, max | |X|-1 | {nrm:.2e}, {traj.n_switchings} switchings")


def check_chattering(x20: float = 2e-4, delta: float = 10.0) -> CheckResult:
    params = ModelParams(delta)
    traj = backward_extremal(x20, params, IntegratorSettings(), t_limit=-2.0)
    rep = verify_chattering_asymptotics(traj)
    tail = ", ".join(f"{r:.4f}" for r in rep.ratios[-3:])
    return CheckResult("chattering-ratios", rep.passed, f"{rep.status}; last ratios {tail} vs 1/alpha {rep.expected:.5f}")


def check_mirror_symmetry(x20: float = 4e-4, delta: float = 10.0) -> CheckResult:
    params = ModelParams(delta)
    s = IntegratorSettings()
    a = backward_extremal(x20, params, s, t_limit=-2.0)
    b = backward_extremal(-x20, params, s, t_limit=-2.0)
    worst = 0.0 if len(a.switch_points) == len(b.switch_points) else math.inf
    for p, q in zip(a.switch_points, b.switch_points):
        img = np.array([-p.X[0], -p.X[1], p.X[2]])
        worst = max(worst, float(np.max(np.abs(img - q.X))), abs(p.t - q.t))
        if (p.u_before, p.u_after) != (-q.u_before, -q.u_after):
            worst = math.inf
    return CheckResult("mirror-symmetry", worst < 1e-10, f"max deviation {worst:.2e}")


def check_direct_gradient(N: int = 20, seed: int = 0) -> CheckResult:
    problem = direct.DirectProblem(N=N)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.9, 0.9, N)
    _, g = direct.objective_and_gradient(u, problem)
    fd = np.empty(N)
    h = 1e-6
    for k in range(N):
        e = np.zeros(N)
        e[k] = h
        fd[k] = (direct.objective_and_gradient(u + e, problem)[0]
                 - direct.objective_and_gradient(u - e, problem)[0]) / (2 * h)
    rel = float(np.linalg.norm(g - fd) / np.linalg.norm(fd))
    return CheckResult("direct-gradient", rel < 1e-6, f"relative error {rel:.2e}")


def check_projection(seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(50):
        a, b = rng.normal(scale=2, size=(2, 30))
        pa, pb = direct.project_box(a), direct.project_box(b)
        ok &= bool(np.array_equal(direct.project_box(pa), pa))
        ok &= bool(np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-15)
        ok &= bool(np.all(np.abs(pa) <= 1.0))
    return CheckResult("box-projection", ok, "idempotent, non-expansive, feasible")


def check_dilation(delta: float = 10.0) -> CheckResult:
    kappas = np.geomspace(1e-2, 1e-6, 9)
    ok = True
    for x, y in ((0.3, 0.8), (-0.5, 0.2), (0.1, -0.9)):
        r = [fuller.dilation_ratios(x, y, k, delta) for k in kappas]
        for key in ("f1x", "f2x", "f1y", "f2y"):
            vals = [d[key] for d in r]
            ok &= all(b <= a * (1 + 1e-12) for a, b in zip(vals[:-1], vals[1:]))
    return CheckResult("dilation-ratios", ok, "perturbation ratios bounded (non-increasing) for kappa <= 1e-2")


ALL_CHECKS = [
    check_fuller_constants,
    check_fuller_recursion,
    check_switching_derivatives,
    check_decoupling,
    check_seed_residuals,
    check_extremal_conservation,
    check_chattering,
    check_mirror_symmetry,
    check_direct_gradient,
    check_projection,
    check_dilation,
]


def run_checks(delta: float = 10.0) -> list:
    out = []
    for fn in ALL_CHECKS:
        kwargs = {"delta": delta} if "delta" in fn.__code__.co_varnames[: fn.__code__.co_argcount] else {}
        try:
            out.append(fn(**kwargs))
        except Exception as exc:  # a crashing check is a failing check
            out.append(CheckResult(fn.__name__.removeprefix("check_"), False, f"error: {exc!r}"))
    return out
