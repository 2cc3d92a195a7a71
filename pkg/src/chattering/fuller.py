"""Exact synthesis of the Fuller problem x' = y, y' = u, cost = integral of x**2.

Optimal trajectories are concatenations of parabolic arcs switching on the
curve x = -xi * sign(y) * y**2. Successive switching states shrink by -1/alpha**2
(x) and -1/alpha (y), so the switching times accumulate geometrically at the
terminal time and the tail of any truncated trajectory is summable in closed form.

The quantum system near |3> reduces to this problem through the map
(x1, x2) -> (-x1/delta, x2) with the control sign reversed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

XI = math.sqrt((math.sqrt(33.0) - 1.0) / 24.0)
ALPHA = math.sqrt((1.0 + 2.0 * XI) / (1.0 - 2.0 * XI))
CURVE_TOL = 1e-12


@dataclass(frozen=True)
class FullerConstants:
    xi: float
    alpha: float

    @property
    def quartic_residual(self) -> float:
        # 36 xi^4 + 3 xi^2 - 2 = 0, scaled by 16
        return 576.0 * self.xi**4 + 48.0 * self.xi**2 - 32.0


@dataclass(frozen=True)
class FullerState:
    x: float
    y: float


@dataclass(frozen=True)
class FullerArc:
    t_start: float
    t_end: float
    u: int
    start: FullerState

    def state(self, t: float) -> FullerState:
        s = t - self.t_start
        x0, y0 = self.start.x, self.start.y
        return FullerState(x0 + y0 * s + 0.5 * self.u * s * s, y0 + self.u * s)

    @property
    def end(self) -> FullerState:
        return self.state(self.t_end)

    def cost(self) -> float:
        return _parabola_square_integral(self.start.x, self.start.y, self.u, self.t_end - self.t_start)


@dataclass
class FullerTrajectory:
    arcs: list
    t_f: float
    cost: float
    tail_time: float = 0.0
    tail_cost: float = 0.0
    start: FullerState = field(default_factory=lambda: FullerState(0.0, 0.0))

    @property
    def final_time(self) -> float:
        return self.t_f

    def switch_times(self) -> list:
        """Times at which the control changes sign (arc junctions)."""
        return [arc.t_end for arc in self.arcs]

    def switch_states(self) -> list:
        return [arc.end for arc in self.arcs]

    def sample(self, per_arc: int = 50) -> np.ndarray:
        """Rows (t, x, y, u) on each arc, endpoints included."""
        rows = []
        for arc in self.arcs:
            for t in np.linspace(arc.t_start, arc.t_end, per_arc):
                st = arc.state(float(t))
                rows.append((float(t), st.x, st.y, float(arc.u)))
        return np.array(rows).reshape(-1, 4)

    def state_at(self, t: float) -> FullerState:
        for arc in self.arcs:
            if arc.t_start <= t <= arc.t_end:
                return arc.state(t)
        if self.arcs and t > self.arcs[-1].t_end:
            raise ValueError("time lies in the untruncated chattering tail")
        raise ValueError(f"time {t} outside the trajectory")


def fuller_constants() -> FullerConstants:
    return FullerConstants(XI, ALPHA)


def fuller_switching_curve(y: float) -> float:
    return -XI * math.copysign(1.0, y) * y * y if y != 0 else 0.0


def on_switching_curve(state: FullerState, tol: float = CURVE_TOL) -> bool:
    scale = max(1.0, state.y * state.y)
    return abs(state.x - fuller_switching_curve(state.y)) <= tol * scale


def fuller_final_time(y0: float) -> float:
    """Time to reach the origin from (-xi*y0**2, y0), y0 > 0."""
    if not y0 > 0:
        raise ValueError("y0 must be positive; use the discrete symmetry for y0 < 0")
    return (1.0 + ALPHA) / (ALPHA - 1.0) * y0


def _parabola_square_integral(x0: float, y0: float, u: float, T: float) -> float:
    """Integral over [0, T] of (x0 + y0 s + u s^2/2)^2 ds."""
    a, b, c = x0, y0, 0.5 * u
    return (
        a * a * T
        + a * b * T**2
        + (b * b + 2.0 * a * c) * T**3 / 3.0
        + b * c * T**4 / 2.0
        + c * c * T**5 / 5.0
    )


def unit_arc_cost() -> float:
    """Cost of the arc from (-xi, 1) to the next switching point."""
    return _parabola_square_integral(-XI, 1.0, -1.0, 1.0 + 1.0 / ALPHA)


def fuller_trajectory(start: FullerState, n_arcs: int, tol: float = 1e-9) -> FullerTrajectory:
    """Optimal trajectory from a switching-curve point, truncated after n_arcs.

    The time and cost of the omitted arcs are summed as geometric series
    and included in t_f and cost.
    """
    if n_arcs < 1:
        raise ValueError("n_arcs must be >= 1")
    if not on_switching_curve(start, tol):
        raise ValueError(f"start {start} is not on the switching curve")
    y0 = start.y
    if y0 == 0.0:
        return FullerTrajectory([], 0.0, 0.0, start=start)

    arcs = []
    t = 0.0
    state = start
    ratio_y = 1.0 / ALPHA
    for _ in range(n_arcs):
        u = -1 if state.y > 0 else 1
        duration = abs(state.y) * (1.0 + ratio_y)
        arc = FullerArc(t, t + duration, u, state)
        arcs.append(arc)
        t += duration
        # closed-form switching state avoids rounding drift along many arcs
        state = FullerState(-state.x * ratio_y**2, -state.y * ratio_y)

    total_time = fuller_final_time(abs(y0))
    running = sum(arc.cost() for arc in arcs)
    q = ALPHA**-5
    tail_cost = unit_arc_cost() * abs(y0) ** 5 * q**n_arcs / (1.0 - q)
    return FullerTrajectory(
        arcs,
        total_time,
        running + tail_cost,
        tail_time=total_time - t,
        tail_cost=tail_cost,
        start=start,
    )


def fuller_cost(traj: FullerTrajectory) -> float:
    return traj.cost


def fuller_total_cost(y0: float) -> float:
    """Cost of the complete chattering trajectory from (-xi*y0**2, y0)."""
    return unit_arc_cost() * abs(y0) ** 5 / (1.0 - ALPHA**-5)


def fuller_feedback(x: float, y: float) -> int:
    """Optimal feedback: -1 above the switching curve, +1 below it."""
    s = x + XI * y * abs(y)
    if s > 0:
        return -1
    if s < 0:
        return 1
    return -1 if y > 0 else (1 if y < 0 else 0)


# --- link with the quantum system near |3> ---------------------------------------


def nilpotent_map(x1: float, x2: float, delta: float) -> FullerState:
    """Quantum (x1, x2) near |3> to Fuller coordinates; controls map as u -> -u."""
    return FullerState(-x1 / delta, x2)


def nilpotent_inverse(state: FullerState, delta: float) -> tuple:
    return (-delta * state.x, state.y)


def quantum_switching_curve(x2: float, delta: float) -> float:
    """Local approximation x1 = sign(x2) * xi * delta * x2**2."""
    return math.copysign(1.0, x2) * XI * delta * x2 * x2 if x2 != 0 else 0.0


def dilation_perturbations(x: float, y: float, delta: float) -> dict:
    """Higher-order terms separating the reduced quantum dynamics from
    x' = delta*y, y' = u, written as x' = delta*y + f1x + u f2x,
    y' = u + f1y + u f2y with x = x1, y = -x2.
    """
    r2 = x * x + y * y
    # 1 - sqrt(1 - r2) without cancellation
    f2y = -r2 / (1.0 + math.sqrt(1.0 - r2))
    return {"f1x": 0.0, "f2x": 0.0, "f1y": -delta * x, "f2y": f2y}


def dilation_ratios(x: float, y: float, kappa: float, delta: float) -> dict:
    """|f^x(g_k)|/k and |f^y(g_k)|/k**2 at the dilated point g_k(x, y) = (k^2 x, k y)."""
    terms = dilation_perturbations(kappa * kappa * x, kappa * y, delta)
    return {
        "f1x": abs(terms["f1x"]) / kappa,
        "f2x": abs(terms["f2x"]) / kappa,
        "f1y": abs(terms["f1y"]) / kappa**2,
        "f2y": abs(terms["f2y"]) / kappa**2,
    }
