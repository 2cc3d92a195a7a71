"""Backward synthesis of optimal trajectories from seeds near |3>.

Seeds sit on the local switching curve x1 = xi*delta*x2**2 at (x1, x2) =
(xi*delta*x20**2, x20). The adjoint is fixed by Phi = 0, H_P = 0 and the
gauge P.X = 0; the extremal flow is then integrated backward, switching at
every zero of Phi. A scalar shooting on x20 connects a prescribed initial
state, and sweeping x20 traces the switching curve.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    TARGET,
    ModelParams,
    dynamics_rhs,
    pontryagin_hamiltonian,
    switching_fn,
)
from .fuller import ALPHA, XI, fuller_final_time, fuller_total_cost
from .integrator import (
    ExtremalTrajectory,
    IntegratorSettings,
    SwitchPoint,
    concatenate_extremal,
)

log = logging.getLogger(__name__)

LOCAL_RADIUS = 0.1
DEDUP_TOL = 1e-8


class ShootingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeedPoint:
    x20: float
    X0: np.ndarray
    P0: np.ndarray


def solve_seed_adjoint(X, params: ModelParams) -> np.ndarray:
    """Costate with Phi = 0, H_P = 0 (normal) and P.X = 0 at a switching state."""
    x1, x2, x3 = X
    d = params.delta
    M = np.array([[0.0, -x3, x2], [-d * x2, d * x1, 0.0], [x1, x2, x3]])
    rhs = np.array([0.0, 0.5 * x1 * x1, 0.0])
    if abs(np.linalg.det(M)) < 1e-300:
        raise ValueError(f"seed conditions are singular at X={X}")
    return np.linalg.solve(M, rhs)


def seed_state(x20: float, params: ModelParams) -> np.ndarray:
    x1 = math.copysign(1.0, x20) * XI * params.delta * x20 * x20
    r2 = x1 * x1 + x20 * x20
    if r2 >= 1.0:
        raise ValueError(f"x20={x20} is too large for a northern seed")
    return np.array([x1, x20, math.sqrt(1.0 - r2)])


def seed_adjoint(x20: float, params: ModelParams) -> SeedPoint:
    if x20 == 0:
        raise ValueError("x20 = 0 puts the seed at |3>, where the seed conditions force P~ = 0")
    X = seed_state(x20, params)
    return SeedPoint(float(x20), X, solve_seed_adjoint(X, params))


def seed_controls(x20: float) -> tuple:
    """Forward controls (before, after) at the seed: -1 -> +1 on the x2 > 0 side."""
    return (-1.0, 1.0) if x20 > 0 else (1.0, -1.0)


def backward_extremal(
    x20: float,
    params: ModelParams,
    settings: IntegratorSettings,
    t_limit: float = -4.0,
    stop=None,
) -> ExtremalTrajectory:
    """Extremal flowing backward from the seed, with the seed listed as the
    first switching point and terminal_time set from the Fuller tail."""
    seed = seed_adjoint(x20, params)
    before, after = seed_controls(x20)
    traj = concatenate_extremal(
        seed.X0, seed.P0, before, -1, settings, params, stop=stop, t0=0.0, t_limit=t_limit
    )
    seed_sp = SwitchPoint(0.0, seed.X0.copy(), seed.P0.copy(), before, after,
                          switching_fn(seed.X0, seed.P0))
    traj.switch_points.insert(0, seed_sp)
    traj.terminal_time = fuller_final_time(abs(x20))
    return traj


# --- shooting ---------------------------------------------------------------------


@dataclass
class Approach:
    t: float
    distance: float
    signed: float
    X: np.ndarray


def closest_approach(traj: ExtremalTrajectory, X_target, params: ModelParams) -> Approach:
    """Point of the trajectory nearest X_target, refined on the dense output.

    The signed miss is the component of X_target along X x V at that point,
    i.e. the side of the trajectory on which the target lies.
    """
    X_target = np.asarray(X_target, float)
    best = None
    for u, step in traj.dense_steps():
        for y in (step.y0, step.y1):
            d = np.linalg.norm(y[:3] - X_target)
            if best is None or d < best[0]:
                best = (d, step, u)
    if best is None:
        X0 = traj.switch_points[0].X if traj.switch_points else None
        raise ShootingError(f"empty trajectory (start {X0})")
    _, step0, _ = best
    # golden-section refinement on the neighbouring steps
    cands = []
    for u, step in traj.dense_steps():
        if abs(step.t0 - step0.t0) <= 2.5 * abs(step0.h) + 1e-15:
            cands.append((u, step))
    out = None
    for u, step in cands:
        lo, hi = 0.0, 1.0
        g = (math.sqrt(5.0) - 1.0) / 2.0
        dist = lambda th: float(np.linalg.norm(step.eval_theta(th)[0][:3] - X_target))  # noqa: E731
        a, b = hi - g * (hi - lo), lo + g * (hi - lo)
        fa, fb = dist(a), dist(b)
        for _ in range(80):
            if fa < fb:
                hi, b, fb = b, a, fa
                a = hi - g * (hi - lo)
                fa = dist(a)
            else:
                lo, a, fa = a, b, fb
                b = lo + g * (hi - lo)
                fb = dist(b)
        for th in (lo, hi, 0.0, 1.0):
            d = dist(th)
            if out is None or d < out[0]:
                out = (d, step.t0 + th * step.h, step.eval_theta(th)[0], u)
    d, t, y, u = out
    X = y[:3]
    V = dynamics_rhs(X, u, params)
    n = np.cross(X, V)
    nn = np.linalg.norm(n)
    signed = float(n @ X_target / nn) if nn > 0 else d
    return Approach(float(t), float(d), signed, X.copy())


@dataclass
class ShootingResult:
    x20_star: float
    tau: float
    t_f: float
    terminal_miss: float
    cost: float
    trajectory: ExtremalTrajectory = field(repr=False)
    running_cost: float = 0.0
    tail_cost: float = 0.0
    tail_time: float = 0.0
    iterations: int = 0
    extrapolated: bool = False
    warning: Optional[str] = None

    @property
    def n_switchings(self) -> int:
        return self.trajectory.n_switchings

    def to_json(self) -> dict:
        return {
            "x20_star": self.x20_star,
            "tau": self.tau,
            "t_f": self.t_f,
            "terminal_miss": self.terminal_miss,
            "cost": self.cost,
            "n_switchings": self.n_switchings,
        }


def _miss(x20, X_init, params, settings, horizon, x3_floor):
    stop = lambda t, X, P: X[2] < x3_floor  # noqa: E731
    traj = backward_extremal(x20, params, settings, t_limit=-horizon, stop=stop)
    return closest_approach(traj, X_init, params), traj


def shoot(
    X_init,
    precision: float,
    params: ModelParams,
    settings: IntegratorSettings = IntegratorSettings(),
    horizon: float = 4.0,
    n_scan: int = 9,
    capture: float = 0.2,
    max_jump: float = 0.25,
    max_iter: int = 40,
    tol: float = 1e-13,
) -> ShootingResult:
    """Find the seed x20 whose backward extremal passes through X_init.

    The largest root with x20 <= precision is kept. The root is bracketed
    by a log-spaced scan over [precision/alpha, precision] and refined by Newton
    iterations on log(x20) with a finite-difference slope, falling back to
    bisection whenever Newton leaves the bracket.
    """
    X_init = np.asarray(X_init, float)
    if abs(X_init @ X_init - 1.0) > 1e-8:
        raise ValueError("X_init must lie on the unit sphere")
    warn = None
    if X_init[2] < 0:
        warn = "X_init is in the southern hemisphere; synthesis structure unverified there"
        warnings.warn(warn)
    extrapolated = bool(np.linalg.norm(X_init - TARGET) > LOCAL_RADIUS)
    sign = 1.0 if X_init[1] >= 0 else -1.0
    x3_floor = min(X_init[2], 0.0) - 0.5
    x2 = float(X_init[1])
    if 0 < abs(x2) <= min(precision, 0.1) and np.linalg.norm(seed_state(x2, params) - X_init) < 1e-12:
        # X_init is itself a seed: nothing to shoot
        return evaluate_seed(x2, X_init, params, settings, horizon, extrapolated=extrapolated, warning=warn)

    def residual(z):
        app, _ = _miss(sign * math.exp(z), X_init, params, settings, horizon, x3_floor)
        return app.signed, app

    z_hi = math.log(precision)
    z_lo = z_hi - math.log(ALPHA) * 1.05
    zs = np.linspace(z_lo, z_hi, n_scan)
    vals = [residual(z) for z in zs]
    brackets = []
    for i in range(n_scan - 1):
        (r0, a0), (r1, a1) = vals[i], vals[i + 1]
        if r0 == 0.0:
            brackets.append((zs[i], zs[i], r0, r0))
        elif (np.sign(r0) != np.sign(r1) and max(a0.distance, a1.distance) < capture
              and abs(a0.t - a1.t) < max_jump):
            # a jump of the approach time means the closest pass changed, not a root
            brackets.append((zs[i], zs[i + 1], r0, r1))
    if vals[-1][0] == 0.0:
        brackets.append((zs[-1], zs[-1], 0.0, 0.0))
    if not brackets:
        raise ShootingError("no sign change of the miss found in [precision/alpha, precision]; "
                            "the root may lie above precision")
    a, b, ra, rb = max(brackets, key=lambda br: br[1])

    z = b if abs(rb) < abs(ra) else a
    r = rb if z == b else ra
    it = 0
    while it < max_iter and a != b and abs(r) > tol and (b - a) > 1e-15:
        it += 1
        dz = 1e-6
        rp, _ = residual(z + dz)
        rm, _ = residual(z - dz)
        slope = (rp - rm) / (2 * dz)
        z_new = z - r / slope if slope != 0 else None
        if z_new is None or not (a < z_new < b):
            z_new = 0.5 * (a + b)
        r_new, _ = residual(z_new)
        if np.sign(r_new) == np.sign(ra):
            a, ra = z_new, r_new
        else:
            b, rb = z_new, r_new
        z, r = z_new, r_new
    if abs(r) > max(1e-6, 1e3 * tol):
        raise ShootingError(f"shooting did not converge (residual {r:.3g})")

    return evaluate_seed(sign * math.exp(z), X_init, params, settings, horizon,
                         iterations=it, extrapolated=extrapolated, warning=warn)


def evaluate_seed(
    x20: float,
    X_init,
    params: ModelParams,
    settings: IntegratorSettings = IntegratorSettings(),
    horizon: float = 4.0,
    iterations: int = 0,
    extrapolated: Optional[bool] = None,
    warning: Optional[str] = None,
) -> ShootingResult:
    """Result record for a given seed: the backward extremal is cut at its
    closest approach to X_init, and the Fuller tail is added to time and cost."""
    X_init = np.asarray(X_init, float)
    if extrapolated is None:
        extrapolated = bool(np.linalg.norm(X_init - TARGET) > LOCAL_RADIUS)
    x3_floor = min(X_init[2], 0.0) - 0.5
    app, _ = _miss(x20, X_init, params, settings, horizon, x3_floor)
    tau = max(0.0, -app.t)
    traj = backward_extremal(x20, params, settings, t_limit=-tau)
    tail_time = fuller_final_time(abs(x20))
    tail_cost = params.delta**2 * fuller_total_cost(abs(x20))
    running = traj.cost_accumulated
    return ShootingResult(
        x20_star=x20,
        tau=tau,
        t_f=tau + tail_time,
        terminal_miss=app.distance,
        cost=running + tail_cost,
        trajectory=traj,
        running_cost=running,
        tail_cost=tail_cost,
        tail_time=tail_time,
        iterations=iterations,
        extrapolated=extrapolated,
        warning=warning,
    )


def forward_control(result: ShootingResult):
    """Forward-time control u(t) on [0, tau] of a shooting result (t = 0 at X_init)."""
    traj = result.trajectory
    tau = result.tau

    def u(t):
        s = np.clip(t - tau, traj.t_end, 0.0)
        return traj.control_at(float(s))

    return u


# --- switching curve --------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    x20_seed: float
    switch_index: int
    X: np.ndarray
    u_before: float
    u_after: float

    @property
    def key(self) -> float:
        return self.switch_index + math.log(abs(self.x20_seed)) / math.log(ALPHA)


@dataclass
class SwitchingCurve:
    branch: str
    samples: list
    delta: float

    def points(self) -> np.ndarray:
        return np.array([p.X for p in self.samples]).reshape(-1, 3)

    def distance_to(self, point) -> float:
        """Distance from point to the polyline through the ordered samples."""
        pts = self.points()
        point = np.asarray(point, float)
        if len(pts) == 1:
            return float(np.linalg.norm(pts[0] - point))
        a, b = pts[:-1], pts[1:]
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        s = np.clip(np.einsum("ij,ij->i", point - a, ab) / np.where(denom > 0, denom, 1.0), 0, 1)
        proj = a + s[:, None] * ab
        return float(np.min(np.linalg.norm(proj - point, axis=1)))


def _curve_points_for_seed(args):
    x20, params, settings, x3_floor, horizon = args
    stop = lambda t, X, P: X[2] < x3_floor  # noqa: E731
    try:
        traj = backward_extremal(x20, params, settings, t_limit=-horizon, stop=stop)
    except Exception as exc:  # per-seed failure must not abort the sweep
        log.warning("seed x20=%g failed: %s", x20, exc)
        return []
    return [
        CurvePoint(x20, k, sp.X.copy(), sp.u_before, sp.u_after)
        for k, sp in enumerate(traj.switch_points)
    ]


def mirror_point(p: CurvePoint) -> CurvePoint:
    """Image under (x1, x2, u) -> (-x1, -x2, -u)."""
    X = np.array([-p.X[0], -p.X[1], p.X[2]])
    return CurvePoint(-p.x20_seed, p.switch_index, X, -p.u_before, -p.u_after)


def build_switching_curve(
    x20_grid: Sequence[float],
    params: ModelParams,
    settings: IntegratorSettings = IntegratorSettings(),
    x3_floor: float = -0.3,
    horizon: float = 6.0,
    workers: int = 1,
) -> dict:
    """Collect the switching points of backward extremals from every seed.

    Returns {"upper": SwitchingCurve, "lower": SwitchingCurve}; the upper
    branch leaves |3> with x2 > 0. Negative seeds are obtained from the
    positive ones through the mirror symmetry.
    """
    grid = sorted(abs(float(x)) for x in x20_grid)
    if any(x == 0 for x in grid):
        raise ValueError("seed grid values must be nonzero")
    jobs = [(x, params, settings, x3_floor, horizon) for x in grid]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            per_seed = list(pool.map(_curve_points_for_seed, jobs))
    else:
        per_seed = [_curve_points_for_seed(j) for j in jobs]

    upper, lower = [], []
    for pts in per_seed:
        for p in pts:
            m = mirror_point(p)
            if p.switch_index % 2 == 0:
                upper.append(p)
                lower.append(m)
            else:
                lower.append(p)
                upper.append(m)

    def order(pts):
        pts = sorted(pts, key=lambda p: (p.key, p.x20_seed))
        out = []
        for p in pts:
            if out and np.linalg.norm(p.X - out[-1].X) < DEDUP_TOL:
                continue
            out.append(p)
        return out

    return {
        "upper": SwitchingCurve("upper", order(upper), params.delta),
        "lower": SwitchingCurve("lower", order(lower), params.delta),
    }


def default_seed_grid(n: int = 16, x20_max: float = 1e-3) -> np.ndarray:
    """Seeds covering one period (factor alpha) of the backward switching map."""
    return np.geomspace(x20_max / ALPHA, x20_max, n, endpoint=False)


def fit_local_coefficient(curve: SwitchingCurve, n_inner: int = 6, min_index: int = 1) -> float:
    """Least-squares lambda in x1 = lambda * x2**2 over the innermost computed points."""
    pts = [p for p in curve.samples if p.switch_index >= min_index][:n_inner]
    if not pts:
        raise ValueError("no computed switching points to fit")
    x1 = np.array([p.X[0] for p in pts])
    x2sq = np.array([p.X[1] ** 2 for p in pts])
    return float(x1 @ x2sq / (x2sq @ x2sq))


def sign_rule_violations(curve: SwitchingCurve, eps: float = 1e-12) -> list:
    """Points whose switch direction contradicts the x2*x3 sign rule."""
    bad = []
    for p in curve.samples:
        s = p.X[1] * p.X[2]
        if abs(s) <= eps:
            continue
        expected = (-1.0, 1.0) if s > 0 else (1.0, -1.0)
        if (p.u_before, p.u_after) != expected:
            bad.append(p)
    return bad


# --- diagnostics ------------------------------------------------------------------


@dataclass
class ChatteringReport:
    ratios: list
    limit_estimate: Optional[float]
    expected: float
    status: str

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def verify_chattering_asymptotics(traj, final_time: Optional[float] = None,
                                  n_check: int = 3, rel_tol: float = 0.05,
                                  min_switchings: int = 6) -> ChatteringReport:
    """Check that (T - t_k)/(T - t_{k-1}) tends to 1/alpha at the innermost switches."""
    times = sorted(traj.switch_times())
    T = final_time if final_time is not None else traj.final_time
    expected = 1.0 / ALPHA
    if T is None or len(times) < min_switchings:
        return ChatteringReport([], None, expected, "inconclusive")
    ratios = [(T - times[k]) / (T - times[k - 1]) for k in range(1, len(times))]
    last = ratios[-n_check:]
    ok = all(abs(r - expected) / expected < rel_tol for r in last)
    return ChatteringReport(ratios, float(np.mean(last)), expected, "pass" if ok else "fail")


def nilpotent_deviation(x20: float, params: ModelParams, settings: IntegratorSettings,
                        n_samples: int = 200) -> float:
    """Max (x1, x2) distance over the innermost backward arc between the
    quantum extremal and the nilpotent model started from the same seed."""
    traj = backward_extremal(x20, params, settings, t_limit=-1.0)
    arc = traj.arcs[0]
    u = arc.u
    X0 = traj.switch_points[0].X
    d = params.delta
    worst = 0.0
    for t in np.linspace(arc.t_start, arc.t_end, n_samples):
        y = arc.state_at(float(t))
        x2n = X0[1] - u * t
        x1n = X0[0] - d * (X0[1] * t - 0.5 * u * t * t)
        worst = max(worst, math.hypot(y[0] - x1n, y[1] - x2n))
    return worst


def seed_residuals(seed: SeedPoint, params: ModelParams) -> tuple:
    """(|Phi|, |H_P|, |P.X|) at a seed; all vanish by construction."""
    before, _ = seed_controls(seed.x20)
    return (
        abs(switching_fn(seed.X0, seed.P0)),
        abs(pontryagin_hamiltonian(seed.X0, seed.P0, before, params)),
        abs(float(seed.P0 @ seed.X0)),
    )
