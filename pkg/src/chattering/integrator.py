"""Dormand-Prince 5(4) propagation of extremals with switching-event location.

The extremal state is packed as y = (x1, x2, x3, p1, p2, p3, cost). Each bang
arc is integrated with its control held fixed until the switching function
changes sign; the crossing is bracketed on the dense output, bisected, and
then polished with Newton steps taken on the real one-step map (not on the
interpolant). Negative step sizes propagate backward in time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import (
    ModelParams,
    extremal_rhs,
    pontryagin_hamiltonian,
    reduced_adjoint,
    switching_derivatives,
    switching_fn,
)

log = logging.getLogger(__name__)

# Dormand-Prince 5(4) tableau
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# quartic dense-output polynomial coefficients (Shampine)
P_DENSE = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SCAN_POINTS = 8
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class IntegratorFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-24
    max_step: float = 0.02
    first_step: float = 1e-5
    event_tol_phi: float = 1e-12
    event_tol_time: float = 1e-13
    max_switchings: int = 400
    t_max: float = 20.0
    hamiltonian_tol: float = 1e-9
    norm_tol: float = 1e-10

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "first_step", "event_tol_phi", "event_tol_time", "t_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_switchings < 1:
            raise ValueError("max_switchings must be >= 1")


def dp5_step(f: Callable, t: float, y: np.ndarray, h: float):
    """One Dormand-Prince step. Returns (y_new, error_estimate, stages)."""
    K = np.empty((7, y.size))
    K[0] = f(t, y)
    for i in range(1, 7):
        dy = h * (np.asarray(A[i]) @ K[:i])
        K[i] = f(t + C[i] * h, y + dy)
    y_new = y + h * (B @ K)
    err = h * (E @ K)
    return y_new, err, K


@dataclass
class DenseStep:
    """Quartic interpolant over one accepted step [t0, t0 + h]."""

    t0: float
    h: float
    y0: np.ndarray
    y1: np.ndarray
    Q: np.ndarray

    @classmethod
    def from_stages(cls, t0, h, y0, y1, K):
        return cls(t0, h, y0, y1, K.T @ P_DENSE)

    @property
    def t1(self) -> float:
        return self.t0 + self.h

    def theta(self, t):
        return (np.asarray(t, dtype=float) - self.t0) / self.h

    def eval_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        powers = np.cumprod(np.repeat(theta[None, :], 4, axis=0), axis=0)
        return (self.y0[:, None] + self.h * (self.Q @ powers)).T

    def __call__(self, t) -> np.ndarray:
        out = self.eval_theta(self.theta(t))
        return out[0] if np.ndim(t) == 0 else out


def _rms_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def propagate(
    f: Callable,
    y0,
    t0: float,
    t1: float,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    max_step: float = np.inf,
    first_step: float = 1e-4,
):
    """Generic adaptive integration from t0 to t1 (either direction).

    Returns (final_state, dense_steps).
    """
    y = np.asarray(y0, dtype=float).copy()
    t = float(t0)
    direction = 1.0 if t1 >= t0 else -1.0
    h = direction * min(abs(first_step), max_step, abs(t1 - t0) or 1.0)
    steps = []
    while direction * (t1 - t) > 0:
        if direction * (t + h - t1) > 0:
            h = t1 - t
        y_new, err, K = dp5_step(f, t, y, h)
        en = _rms_norm(err, y, y_new, rtol, atol)
        if en <= 1.0:
            steps.append(DenseStep.from_stages(t, h, y, y_new, K))
            t, y = t + h, y_new
            factor = MAX_FACTOR if en == 0 else min(MAX_FACTOR, SAFETY * en**-0.2)
            h = direction * min(abs(h) * factor, max_step)
        else:
            h *= max(MIN_FACTOR, SAFETY * en**-0.2)
            if abs(h) < 1e-15 * max(1.0, abs(t)):
                raise IntegratorFailure(f"step size underflow at t={t}")
    return y, steps


# --- extremal arcs ---------------------------------------------------------------


@dataclass
class BangArc:
    u: float
    t_start: float
    t_end: float
    steps: list = field(repr=False)

    @property
    def direction(self) -> int:
        return 1 if self.t_end >= self.t_start else -1

    @property
    def cost(self) -> float:
        """Running cost of the arc, counted positively in either direction."""
        if not self.steps:
            return 0.0
        return abs(float(self.steps[-1].y1[6] - self.steps[0].y0[6]))

    def sample_times(self) -> np.ndarray:
        if not self.steps:
            return np.array([self.t_start])
        return np.array([self.t_start] + [s.t1 for s in self.steps])

    def sample_states(self) -> np.ndarray:
        if not self.steps:
            return np.empty((0, 7))
        return np.vstack([self.steps[0].y0] + [s.y1 for s in self.steps])

    def state_at(self, t: float) -> np.ndarray:
        for s in self.steps:
            lo, hi = sorted((s.t0, s.t1))
            if lo <= t <= hi:
                return s(t)
        raise ValueError(f"time {t} is outside the arc [{self.t_start}, {self.t_end}]")


@dataclass(frozen=True)
class SwitchPoint:
    t: float
    X: np.ndarray
    P: np.ndarray
    u_before: float
    u_after: float
    phi: float


@dataclass
class ExtremalTrajectory:
    """Concatenated bang arcs, ordered in integration order."""

    arcs: list
    switch_points: list
    direction: int
    cost_accumulated: float
    status: str = "ok"
    truncated: bool = False
    max_hamiltonian: float = 0.0
    max_norm_error: float = 0.0
    terminal_time: Optional[float] = None

    @property
    def final_time(self):
        return self.terminal_time

    @property
    def n_switchings(self) -> int:
        return len(self.switch_points)

    def switch_times(self) -> list:
        """Switching times in increasing (forward) time order."""
        return sorted(sp.t for sp in self.switch_points)

    @property
    def t_start(self) -> float:
        return self.arcs[0].t_start

    @property
    def t_end(self) -> float:
        return self.arcs[-1].t_end

    def dense_steps(self):
        for arc in self.arcs:
            for s in arc.steps:
                yield arc.u, s

    def samples(self) -> np.ndarray:
        """Rows (t, x1, x2, x3, p1, p2, p3, u, phi, event), forward time order."""
        rows = []
        for arc in self.arcs:
            ts = arc.sample_times()
            ys = arc.sample_states()
            for t, y in zip(ts, ys):
                rows.append([t, *y[:6], arc.u, switching_fn(y[:3], y[3:6]), 0.0])
        for sp in self.switch_points:
            rows.append([sp.t, *sp.X, *sp.P, sp.u_after if self.direction > 0 else sp.u_before,
                         sp.phi, 1.0])
        rows = np.array(rows).reshape(-1, 10)
        order = np.lexsort((rows[:, 9], rows[:, 0]))
        return rows[order]

    def state_at(self, t: float) -> np.ndarray:
        for arc in self.arcs:
            lo, hi = sorted((arc.t_start, arc.t_end))
            if lo <= t <= hi:
                return arc.state_at(t)
        raise ValueError(f"time {t} outside trajectory")

    def control_at(self, t: float) -> float:
        for arc in self.arcs:
            lo, hi = sorted((arc.t_start, arc.t_end))
            if lo <= t <= hi:
                return arc.u
        raise ValueError(f"time {t} outside trajectory")


def _block_error(err, y0, y1, settings: IntegratorSettings) -> float:
    rtol, atol = settings.rel_tol, settings.abs_tol
    sx = atol + rtol * max(np.linalg.norm(y0[:3]), np.linalg.norm(y1[:3]))
    sp = atol + rtol * max(np.linalg.norm(y0[3:6]), np.linalg.norm(y1[3:6]))
    return max(np.linalg.norm(err[:3]) / sx, np.linalg.norm(err[3:6]) / sp)


def _renormalize(y: np.ndarray) -> np.ndarray:
    y = y.copy()
    y[:3] /= np.linalg.norm(y[:3])
    return y


def _phi_rows(Y: np.ndarray) -> np.ndarray:
    return Y[:, 5] * Y[:, 1] - Y[:, 4] * Y[:, 2]


def _locate_event(f, step: DenseStep, th_lo: float, th_hi: float, u: float,
                  settings: IntegratorSettings, params: ModelParams):
    """Bisect the sign change of u*Phi on the interpolant, then polish with
    Newton steps on the true one-step map. Returns (t_event, y_event, K)."""
    tol_theta = settings.event_tol_time / abs(step.h)
    while th_hi - th_lo > tol_theta:
        mid = 0.5 * (th_lo + th_hi)
        if mid <= th_lo or mid >= th_hi:
            break
        y = step.eval_theta(mid)[0]
        if u * switching_fn(y[:3], y[3:6]) < 0:
            th_hi = mid
        else:
            th_lo = mid
    h_e = th_hi * step.h
    y_e, _, K = dp5_step(f, step.t0, step.y0, h_e)
    for _ in range(3):
        phi, dphi, *_ = switching_derivatives(y_e[:3], y_e[3:6], u, params)
        if dphi == 0.0 or abs(phi) <= settings.event_tol_phi * 1e-3 * max(1e-300, np.linalg.norm(y_e[3:6])):
            break
        dh = -phi / dphi
        # stay inside the bracket found on the interpolant (with slack)
        if abs(dh) > 10 * settings.event_tol_time + 1e-3 * abs(step.h):
            break
        h_new = h_e + dh
        if not (0 < h_new / step.h <= 1.0 + 1e-12):
            break
        h_e = h_new
        y_e, _, K = dp5_step(f, step.t0, step.y0, h_e)
    return step.t0 + h_e, h_e, y_e, K


def integrate_bang_arc(
    X0,
    P0,
    u: float,
    direction: int,
    settings: IntegratorSettings,
    params: ModelParams,
    t0: float = 0.0,
    cost0: float = 0.0,
    t_limit: Optional[float] = None,
    stop: Optional[Callable] = None,
    h0: Optional[float] = None,
):
    """Integrate the extremal flow with fixed control u from (X0, P0) at t0.

    Stops at the first sign change of u*Phi ("switch"), at t_limit
    ("max-time"), when stop(t, X, P) is true ("target-reached") or when Phi
    and its derivative vanish over a whole step ("degenerate-arc").
    A u = 0 arc is not a bang arc and never produces switch events.

    Returns (arc, event, y_end, h_last).
    """
    direction = 1 if direction >= 0 else -1
    if t_limit is None:
        t_limit = t0 + direction * settings.t_max
    f = lambda t, y: extremal_rhs(y, u, params)  # noqa: E731
    y = np.concatenate([np.asarray(X0, float), np.asarray(P0, float), [cost0]])
    t = float(t0)
    h = direction * abs(h0 if h0 else settings.first_step)
    steps = []
    event = "max-time"
    bang = u != 0
    scan = np.arange(1, SCAN_POINTS + 1) / SCAN_POINTS

    while True:
        remaining = direction * (t_limit - t)
        if remaining <= 1e-15 * max(1.0, abs(t)):
            event = "max-time"
            break
        h = direction * min(abs(h), settings.max_step, remaining)
        y_new, err, K = dp5_step(f, t, y, h)
        en = _block_error(err, y, y_new, settings)
        if not np.isfinite(en):
            raise IntegratorFailure(f"non-finite state at t={t}")
        if en > 1.0:
            h *= max(MIN_FACTOR, SAFETY * en**-0.2)
            if abs(h) < 1e-15 * max(1.0, abs(t)):
                raise IntegratorFailure(f"step size underflow at t={t}")
            continue

        step = DenseStep.from_stages(t, h, y, y_new, K)
        factor = MAX_FACTOR if en == 0 else min(MAX_FACTOR, SAFETY * en**-0.2)

        if bang:
            Y = step.eval_theta(scan)
            Y[-1] = y_new
            phis = _phi_rows(Y)
            wrong = np.nonzero(u * phis < 0)[0]
            if wrong.size:
                j = int(wrong[0])
                th_lo = 0.0 if j == 0 else scan[j - 1]
                t_e, h_e, y_e, K_e = _locate_event(f, step, th_lo, scan[j], u, settings, params)
                y_e_n = _renormalize(y_e)
                steps.append(DenseStep.from_stages(t, h_e, y, y_e_n, K_e))
                t, y = t_e, y_e_n
                event = "switch"
                h = h_e if abs(h_e) > 1e-3 * abs(h) else h
                break
            pt = np.linalg.norm(reduced_adjoint(y_new[:3], y_new[3:6]))
            dphi_scale = settings.event_tol_phi * params.delta * pt
            if pt == 0.0 or (
                np.max(np.abs(phis)) <= settings.event_tol_phi * pt
                and abs(switching_derivatives(y_new[:3], y_new[3:6], u, params)[1]) <= dphi_scale
            ):
                steps.append(step)
                t, y = t + h, _renormalize(y_new)
                event = "degenerate-arc"
                break

        y_new = _renormalize(y_new)
        step.y1 = y_new
        steps.append(step)
        t, y = t + h, y_new
        h = direction * abs(h) * factor
        if stop is not None and stop(t, y[:3], y[3:6]):
            event = "target-reached"
            break

    arc = BangArc(u, float(t0), float(t), steps)
    return arc, event, y, h


def concatenate_extremal(
    X0,
    P0,
    u0: float,
    direction: int,
    settings: IntegratorSettings,
    params: ModelParams,
    stop: Optional[Callable] = None,
    t0: float = 0.0,
    t_limit: Optional[float] = None,
) -> ExtremalTrajectory:
    """Chain bang arcs, flipping the control at each zero of Phi.

    Ends on the stop predicate, on t_limit, after settings.max_switchings
    switches (truncated=True) or on a degenerate arc (status set, aborted).
    """
    direction = 1 if direction >= 0 else -1
    if t_limit is None:
        t_limit = t0 + direction * settings.t_max
    X = np.asarray(X0, float)
    P = np.asarray(P0, float)
    u = float(u0)
    t = float(t0)
    cost = 0.0
    arcs, switches = [], []
    h = None
    status, truncated = "ok", False
    H0 = pontryagin_hamiltonian(X, P, u, params)
    max_h = abs(H0)
    max_norm = abs(float(X @ X) - 1.0)

    while True:
        arc, event, y, h = integrate_bang_arc(
            X, P, u, direction, settings, params, t0=t, cost0=cost, t_limit=t_limit, stop=stop, h0=h
        )
        arcs.append(arc)
        for s in arc.steps:
            yy = s.y1
            max_h = max(max_h, abs(pontryagin_hamiltonian(yy[:3], yy[3:6], u, params)))
            max_norm = max(max_norm, abs(float(yy[:3] @ yy[:3]) - 1.0))
        t, X, P, cost = arc.t_end, y[:3].copy(), y[3:6].copy(), float(y[6])
        if event != "switch":
            if event == "degenerate-arc":
                status = "degenerate-arc"
                log.warning("degenerate arc at t=%.6g, trajectory aborted", t)
            elif event == "target-reached":
                status = "target-reached"
            else:
                status = "max-time"
            break
        u_new = -u
        if direction > 0:
            before, after = u, u_new
        else:
            before, after = u_new, u
        switches.append(SwitchPoint(t, X.copy(), P.copy(), before, after, switching_fn(X, P)))
        u = u_new
        if len(switches) >= settings.max_switchings:
            truncated = True
            status = "max-switchings"
            break

    if max_h > settings.hamiltonian_tol and abs(H0) <= settings.hamiltonian_tol:
        log.warning("Hamiltonian drift %.3g exceeds tolerance", max_h)
    return ExtremalTrajectory(
        arcs,
        switches,
        direction,
        abs(cost),
        status=status,
        truncated=truncated,
        max_hamiltonian=max_h,
        max_norm_error=max_norm,
    )
