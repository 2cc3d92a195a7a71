"""Reduced three-level dynamics, the normal adjoint flow and the switching function.

The reduced state X = (x1, x2, x3) lives on the unit sphere and obeys

    dX/dt = (delta * Omega3 + u * Omega1) X,

with |u| <= 1. The running cost is the integral of x1**2. Only normal
extremals (p0 = -1/2) are used downstream; abnormal ones never reach the
target optimally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-10
P0_NORMAL = -0.5

OMEGA1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
OMEGA2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
OMEGA3 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])

TARGET = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class ModelParams:
    """Coupling constant and control bound (bound normalized to 1 by time rescaling)."""

    delta: float = 10.0
    u_max: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.u_max != 1.0:
            raise ValueError("u_max is normalized to 1; rescale time and delta instead")


@dataclass(frozen=True)
class StateVector:
    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        check_on_sphere(self.as_array())

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3], dtype=float)

    @classmethod
    def from_array(cls, x) -> "StateVector":
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), float(x[1]), float(x[2]))


@dataclass(frozen=True)
class AdjointVector:
    p1: float
    p2: float
    p3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3], dtype=float)

    @classmethod
    def from_array(cls, p) -> "AdjointVector":
        p = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(p)):
            raise ValueError("adjoint vector must be finite")
        return cls(float(p[0]), float(p[1]), float(p[2]))


@dataclass(frozen=True)
class FullQuantumState:
    """Six real coordinates of the three complex amplitudes.

    Identification (see docs/derivation.md for the sign on c3):
    c1 = x1 + i x4, c2 = x5 - i x2, c3 = -(x3 + i x6).
    """

    x: tuple

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=float)
        if arr.shape != (6,):
            raise ValueError("full state needs six real coordinates")
        if abs(float(arr @ arr) - 1.0) > NORM_TOL:
            raise ValueError("full state is not normalized")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)


def check_on_sphere(x, tol: float = NORM_TOL) -> None:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("state must be finite")
    if abs(float(x @ x) - 1.0) > tol:
        raise ValueError(f"state {x} is off the unit sphere (tol {tol})")


def clip_control(u: float, u_max: float = 1.0) -> float:
    return float(min(u_max, max(-u_max, u)))


def generator(u: float, params: ModelParams) -> np.ndarray:
    """Skew-symmetric matrix delta*Omega3 + u*Omega1."""
    return params.delta * OMEGA3 + u * OMEGA1


def dynamics_rhs(X, u: float, params: ModelParams) -> np.ndarray:
    x1, x2, x3 = X
    d = params.delta
    return np.array([-d * x2, d * x1 - u * x3, u * x2])


def adjoint_rhs(X, P, u: float, params: ModelParams) -> np.ndarray:
    """Normal adjoint equations (p0 = -1/2)."""
    x1 = X[0]
    p1, p2, p3 = P
    d = params.delta
    return np.array([-d * p2 + x1, d * p1 - u * p3, u * p2])


def switching_fn(X, P) -> float:
    """Phi = P . Omega1 X; the maximizing control is sign(Phi)."""
    return float(P[2] * X[1] - P[1] * X[2])


def pontryagin_hamiltonian(X, P, u: float, params: ModelParams, p0: float = P0_NORMAL) -> float:
    x1, x2, _ = X
    d = params.delta
    return float(d * (P[1] * x1 - P[0] * x2) + u * switching_fn(X, P) + p0 * x1 * x1)


def reduced_adjoint(X, P) -> np.ndarray:
    """Gauge-fixed costate P - (P.X) X, tangent to the sphere at X."""
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    return P - float(P @ X) * X


def switching_derivatives(X, P, u: float, params: ModelParams) -> tuple:
    """Phi and its first four time derivatives along the normal flow.

    The third and fourth derivatives assume u is constant (bang arc).
    """
    x1, x2, x3 = X
    p1, p2, p3 = P
    d = params.delta
    d2 = d * d
    phi = p3 * x2 - p2 * x3
    dphi = d * (x1 * p3 - x3 * p1)
    ddphi = -d2 * phi + d * u * (x1 * p2 - x2 * p1) - d * x1 * x3
    d3phi = -(d2 + 1.0) * dphi - 2.0 * d * u * x1 * x2 + d2 * x2 * x3
    d4phi = (
        -(d2 + 1.0) * ddphi
        + d * (d2 + 2.0) * x1 * x3
        + d2 * u * (3.0 * x2 * x2 - 2.0 * x1 * x1 - x3 * x3)
    )
    return float(phi), float(dphi), float(ddphi), float(d3phi), float(d4phi)


def extremal_rhs(y, u: float, params: ModelParams) -> np.ndarray:
    """Combined flow for y = (X, P, cost); the last slot integrates x1**2."""
    x1, x2, x3, p1, p2, p3 = y[0], y[1], y[2], y[3], y[4], y[5]
    d = params.delta
    return np.array(
        [
            -d * x2,
            d * x1 - u * x3,
            u * x2,
            -d * p2 + x1,
            d * p1 - u * p3,
            u * p2,
            x1 * x1,
        ]
    )


# --- six-dimensional Schroedinger model -----------------------------------------


def schrodinger_hamiltonian(u: float, params: ModelParams) -> np.ndarray:
    d = params.delta
    return np.array([[0.0, d, 0.0], [d, 0.0, u], [0.0, u, 0.0]], dtype=complex)


def real_to_amplitudes(x) -> np.ndarray:
    x1, x2, x3, x4, x5, x6 = x
    return np.array([x1 + 1j * x4, x5 - 1j * x2, -(x3 + 1j * x6)])


def amplitudes_to_real(c) -> np.ndarray:
    c1, c2, c3 = c
    return np.array([c1.real, -c2.imag, -c3.real, c1.imag, c2.real, -c3.imag])


def full_schrodinger_rhs(x, u: float, params: ModelParams) -> np.ndarray:
    """Velocity of the six real coordinates from i dc/dt = H c.

    The coordinate map is linear over the reals, so the velocity is obtained
    by mapping dc/dt back through the same identification.
    """
    c = real_to_amplitudes(x)
    dc = -1j * (schrodinger_hamiltonian(u, params) @ c)
    return amplitudes_to_real(dc)


def project_to_reduced(x) -> np.ndarray:
    return np.asarray(x, dtype=float)[:3].copy()
