"""Direct optimization with piecewise-constant controls at fixed final time.

Objective: J(u) = integral of x1**2 + mu * |X(t_f) - e3|**2, with u_k in [-1, 1]
held constant on N equal steps. Each step is propagated with m fixed
Dormand-Prince substeps (5th-order weights). Because the field is linear in X
for a frozen control, the substep map and its quadrature of x1**2 reduce to a
3x3 transition matrix and a 3x3 quadratic form per step; the gradient is the
exact reverse sweep (discrete adjoint) through these maps.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .dynamics import TARGET, ModelParams
from .integrator import A as RK_A
from .integrator import B as RK_B


@dataclass(frozen=True)
class DirectProblem:
    N: int
    t_f: float = 2.59
    mu: float = 1e3
    X_init: tuple = (0.0, 1.0, 0.0)
    params: ModelParams = ModelParams()
    max_substep: float = 0.005

    def __post_init__(self):
        if self.t_f <= 0:
            raise ValueError("t_f must be positive")
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")

    @property
    def step(self) -> float:
        return self.t_f / self.N

    @property
    def substeps(self) -> int:
        return max(1, math.ceil(self.step / self.max_substep - 1e-12))

    def times(self) -> np.ndarray:
        return np.arange(self.N) * self.step


@dataclass
class DirectSolution:
    controls: np.ndarray
    cost_running: float
    terminal_distance: float
    objective: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)
    problem: Optional[DirectProblem] = field(default=None, repr=False)

    def sign_changes(self, lo: float, hi: float) -> int:
        """Sign changes of the control among steps with index fraction in [lo, hi)."""
        u = self.controls
        n = len(u)
        seg = u[int(round(lo * n)) : int(round(hi * n))]
        s = np.sign(seg)
        s = s[s != 0]
        return int(np.sum(s[1:] != s[:-1]))


def project_box(u, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    return np.clip(np.asarray(u, dtype=float), lo, hi)


def step_maps(u: np.ndarray, problem: DirectProblem):
    """Per-step transition M_k, cost form Q_k and their u-derivatives.

    Arrays of shape (N, 3, 3). Exactly reproduces m DP5 substeps applied to
    (X, cost) with constant control.
    """
    u = np.ascontiguousarray(u, dtype=float)
    return _step_maps(u, problem.params.delta, problem.step / problem.substeps,
                      problem.substeps, _RK_A, _RK_B)


_RK_A = np.zeros((6, 6))
for _i in range(1, 6):
    _RK_A[_i, :_i] = RK_A[_i]
_RK_B = np.asarray(RK_B[:6], dtype=float)


@njit(cache=True)
def _matmul(a, b, out):
    for i in range(3):
        for j in range(3):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j] + a[i, 2] * b[2, j]


@njit(cache=True)
def _step_maps(u, delta, h, m, a_tab, b_tab):
    n = u.size
    M = np.zeros((n, 3, 3))
    Q = np.zeros((n, 3, 3))
    dM = np.zeros((n, 3, 3))
    dQ = np.zeros((n, 3, 3))
    S = np.zeros((6, 3, 3))
    dS = np.zeros((6, 3, 3))
    AS = np.zeros((6, 3, 3))
    dAS = np.zeros((6, 3, 3))
    R = np.zeros((3, 3))
    dR = np.zeros((3, 3))
    q = np.zeros((3, 3))
    dq = np.zeros((3, 3))
    Mk = np.zeros((3, 3))
    dMk = np.zeros((3, 3))
    tmp = np.zeros((3, 3))
    tmp2 = np.zeros((3, 3))
    for k in range(n):
        uk = u[k]
        # A = delta*Omega3 + u*Omega1 acts on a matrix row-wise:
        # (A B)[0] = -delta B[1], (A B)[1] = delta B[0] - u B[2], (A B)[2] = u B[1]
        for i in range(6):
            for r in range(3):
                for c in range(3):
                    acc = 1.0 if r == c else 0.0
                    dacc = 0.0
                    for j in range(i):
                        a = a_tab[i, j]
                        acc += h * a * AS[j, r, c]
                        dacc += h * a * dAS[j, r, c]
                    S[i, r, c] = acc
                    dS[i, r, c] = dacc
            for c in range(3):
                s0 = S[i, 0, c]
                s1 = S[i, 1, c]
                s2 = S[i, 2, c]
                d0 = dS[i, 0, c]
                d1 = dS[i, 1, c]
                d2 = dS[i, 2, c]
                AS[i, 0, c] = -delta * s1
                AS[i, 1, c] = delta * s0 - uk * s2
                AS[i, 2, c] = uk * s1
                # d(A S)/du = Omega1 S + A dS
                dAS[i, 0, c] = -delta * d1
                dAS[i, 1, c] = -s2 + delta * d0 - uk * d2
                dAS[i, 2, c] = s1 + uk * d1
        for r in range(3):
            for c in range(3):
                acc = 1.0 if r == c else 0.0
                dacc = 0.0
                qa = 0.0
                dqa = 0.0
                for i in range(6):
                    hb = h * b_tab[i]
                    acc += hb * AS[i, r, c]
                    dacc += hb * dAS[i, r, c]
                    # stage value of x1 is row 0 of S_i
                    qa += hb * S[i, 0, r] * S[i, 0, c]
                    dqa += hb * (dS[i, 0, r] * S[i, 0, c] + S[i, 0, r] * dS[i, 0, c])
                R[r, c] = acc
                dR[r, c] = dacc
                q[r, c] = qa
                dq[r, c] = dqa
        for r in range(3):
            for c in range(3):
                Mk[r, c] = 1.0 if r == c else 0.0
                dMk[r, c] = 0.0
                Q[k, r, c] = 0.0
                dQ[k, r, c] = 0.0
        for _ in range(m):
            # Q += Mk^T q Mk ; dQ += dMk^T q Mk + Mk^T dq Mk + Mk^T q dMk
            _matmul(q, Mk, tmp)
            _matmul(q, dMk, tmp2)
            for r in range(3):
                for c in range(3):
                    v = 0.0
                    dv = 0.0
                    for j in range(3):
                        v += Mk[j, r] * tmp[j, c]
                        dv += dMk[j, r] * tmp[j, c] + Mk[j, r] * tmp2[j, c]
                    Q[k, r, c] += v
                    dQ[k, r, c] += dv
            _matmul(dq, Mk, tmp)
            for r in range(3):
                for c in range(3):
                    dQ[k, r, c] += Mk[0, r] * tmp[0, c] + Mk[1, r] * tmp[1, c] + Mk[2, r] * tmp[2, c]
            _matmul(dR, Mk, tmp)
            _matmul(R, dMk, tmp2)
            for r in range(3):
                for c in range(3):
                    dMk[r, c] = tmp[r, c] + tmp2[r, c]
            _matmul(R, Mk, tmp)
            for r in range(3):
                for c in range(3):
                    Mk[r, c] = tmp[r, c]
        for r in range(3):
            for c in range(3):
                M[k, r, c] = Mk[r, c]
                dM[k, r, c] = dMk[r, c]
    return M, Q, dM, dQ


@njit(cache=True)
def _sweeps(M, Q, dM, dQ, x0, mu, target):
    n = M.shape[0]
    xs = np.zeros((n + 1, 3))
    xs[0, :] = x0
    running = 0.0
    for k in range(n):
        for r in range(3):
            xr = xs[k, r]
            for c in range(3):
                running += xr * Q[k, r, c] * xs[k, c]
                xs[k + 1, c] += M[k, c, r] * xr
    miss = xs[n] - target
    J = running + mu * (miss[0] ** 2 + miss[1] ** 2 + miss[2] ** 2)
    grad = np.zeros(n)
    lam = 2.0 * mu * miss
    new = np.zeros(3)
    for k in range(n - 1, -1, -1):
        g = 0.0
        for r in range(3):
            new[r] = 0.0
        for r in range(3):
            for c in range(3):
                xc = xs[k, c]
                g += xs[k, r] * dQ[k, r, c] * xc + lam[r] * dM[k, r, c] * xc
                new[c] += M[k, r, c] * lam[r] + 2.0 * Q[k, c, r] * xs[k, r]
        grad[k] = g
        for r in range(3):
            lam[r] = new[r]
    return J, running, grad, xs


def simulate(u, problem: DirectProblem):
    """State at every step boundary and the running cost."""
    M, Q, dM, dQ = step_maps(u, problem)
    _, running, _, xs = _sweeps(M, Q, dM, dQ, np.asarray(problem.X_init, float), 0.0, TARGET)
    return xs, float(running)


def objective_and_gradient(u, problem: DirectProblem):
    u = np.asarray(u, float)
    if u.size != problem.N:
        raise ValueError(f"expected {problem.N} controls, got {u.size}")
    M, Q, dM, dQ = step_maps(u, problem)
    # reverse sweep: lam_k = M_k^T lam_{k+1} + 2 Q_k X_k, dJ/du_k = X_k.dQ_k.X_k + lam_{k+1}.dM_k.X_k
    J, _, grad, _ = _sweeps(M, Q, dM, dQ, np.asarray(problem.X_init, float), float(problem.mu), TARGET)
    return float(J), grad


def _evaluate(u, problem):
    xs, running = simulate(u, problem)
    dist = float(np.linalg.norm(xs[-1] - TARGET))
    return running, dist


def solve_direct(
    problem: DirectProblem,
    init=None,
    max_iter: int = 3000,
    tol: float = 1e-7,
    armijo: float = 1e-4,
    shrink: float = 0.5,
) -> DirectSolution:
    """Projected gradient with Armijo backtracking along the projection arc.

    Trial steps come from the Barzilai-Borwein rule; acceptance requires
    sufficient decrease, so the objective is monotone. init is None/"zero",
    a scalar, or an array of N controls.
    """
    if init is None or (isinstance(init, str) and init == "zero"):
        u = np.zeros(problem.N)
    elif np.isscalar(init):
        u = np.full(problem.N, float(init))
    else:
        u = np.asarray(init, float).copy()
        if u.size != problem.N:
            raise ValueError("initial control has the wrong length")
    u = project_box(u)
    J, g = objective_and_gradient(u, problem)
    history = [J]
    alpha = 1.0 / max(1e-12, float(np.max(np.abs(g))))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pg = project_box(u - g) - u
        if float(np.max(np.abs(pg))) < tol:
            converged = True
            it -= 1
            break
        t = alpha
        while True:
            u_new = project_box(u - t * g)
            J_new, g_new = objective_and_gradient(u_new, problem)
            if J_new <= J + armijo * float(g @ (u_new - u)):
                break
            t *= shrink
            if t < 1e-16:
                break
        if J_new > J:
            # no admissible decrease at machine precision
            converged = float(np.max(np.abs(pg))) < 1e3 * tol
            break
        s = u_new - u
        y = g_new - g
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 0 else 1e3 * t
        alpha = min(max(alpha, 1e-10), 1e6)
        u, J, g = u_new, J_new, g_new
        history.append(J)
    running, dist = _evaluate(u, problem)
    return DirectSolution(u, running, dist, J, it, converged, history, problem)


def solve_continuation(
    problem: DirectProblem,
    init=None,
    mu_start: float = 10.0,
    factor: float = 10.0,
    max_iter: int = 20000,
    tol: float = 1e-7,
) -> DirectSolution:
    """Penalty continuation: solve at mu_start, then multiply mu by factor
    up to problem.mu, warm-starting each solve from the previous controls.

    Large penalties make the plain gradient iteration crawl; the weakly
    penalized problem converges quickly, and each increase of mu then only
    needs a handful of iterations. Iterations are summed over the stages.
    """
    mus = []
    mu = min(mu_start, problem.mu)
    while mu < problem.mu * (1 - 1e-12):
        mus.append(mu)
        mu *= factor
    mus.append(problem.mu)
    u = init
    total = 0
    history = []
    for mu in mus:
        stage = dataclasses.replace(problem, mu=mu)
        sol = solve_direct(stage, init=u, max_iter=max_iter, tol=tol)
        u = sol.controls
        total += sol.iterations
        history.extend(sol.history)
    return DirectSolution(sol.controls, sol.cost_running, sol.terminal_distance, sol.objective,
                          total, sol.converged, history, problem)


def prolong(u: np.ndarray, N: int) -> np.ndarray:
    """Resample a piecewise-constant control on a finer uniform grid."""
    u = np.asarray(u, float)
    idx = np.minimum((np.arange(N) * u.size) // N, u.size - 1)
    return u[idx]


def sample_control(control_fn, problem: DirectProblem) -> np.ndarray:
    """Piecewise-constant sampling of a control u(t) at step midpoints."""
    mids = (np.arange(problem.N) + 0.5) * problem.step
    return np.array([control_fn(t) for t in mids], float)


@dataclass
class ComparisonRow:
    N: int
    mu: float
    cost: float
    terminal_distance: float
    iterations: int
    converged: bool
    reference_cost: float

    @property
    def gap(self) -> float:
        return abs(self.cost - self.reference_cost)


def compare_to_pmp(solutions: Sequence[DirectSolution], reference_cost: float) -> list:
    rows = []
    for sol in sorted(solutions, key=lambda s: s.problem.N):
        rows.append(
            ComparisonRow(sol.problem.N, sol.problem.mu, sol.cost_running, sol.terminal_distance,
                          sol.iterations, sol.converged, reference_cost)
        )
    return rows


STUDY_HEADER = ["N", "mu", "cost", "terminal_distance", "iterations", "converged"]


def write_study_csv(path, rows: Sequence[ComparisonRow], with_reference: bool = False) -> None:
    header = STUDY_HEADER + (["reference_cost", "cost_gap"] if with_reference else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            line = [r.N, repr(r.mu), repr(r.cost), repr(r.terminal_distance), r.iterations, int(r.converged)]
            if with_reference:
                line += [repr(r.reference_cost), repr(r.gap)]
            w.writerow(line)


def write_control_csv(path, sol: DirectSolution) -> None:
    times = sol.problem.times()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t_k", "u_k"])
        for k, (t, u) in enumerate(zip(times, sol.controls)):
            w.writerow([k, repr(float(t)), repr(float(u))])
