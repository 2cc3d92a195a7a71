import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from chattering.dynamics import (
    OMEGA1,
    OMEGA3,
    AdjointVector,
    FullQuantumState,
    ModelParams,
    StateVector,
    adjoint_rhs,
    amplitudes_to_real,
    clip_control,
    dynamics_rhs,
    extremal_rhs,
    full_schrodinger_rhs,
    generator,
    pontryagin_hamiltonian,
    real_to_amplitudes,
    reduced_adjoint,
    schrodinger_hamiltonian,
    switching_derivatives,
    switching_fn,
)

unit = st.floats(-1, 1, allow_nan=False)
ctrl = st.floats(-1, 1, allow_nan=False)
vec3 = st.tuples(unit, unit, unit).filter(lambda v: np.linalg.norm(v) > 0.1)


def _sphere(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0.0)
    with pytest.raises(ValueError):
        ModelParams(-3.0)
    with pytest.raises(ValueError):
        ModelParams(10.0, u_max=2.0)
    assert ModelParams().delta == 10.0


def test_state_vector_rejects_off_sphere():
    with pytest.raises(ValueError):
        StateVector(1.0, 1.0, 0.0)
    s = StateVector.from_array([0.0, 0.6, 0.8])
    assert np.allclose(s.as_array(), [0, 0.6, 0.8])
    with pytest.raises(ValueError):
        AdjointVector.from_array([np.nan, 0, 0])


def test_full_state_normalization():
    FullQuantumState((1.0, 0, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        FullQuantumState((1.0, 1.0, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        FullQuantumState((1.0, 0, 0))


def test_clip_control():
    assert clip_control(3.0) == 1.0
    assert clip_control(-3.0) == -1.0
    assert clip_control(0.25) == 0.25


@given(vec3, ctrl)
def test_rhs_matches_generator_and_is_tangent(v, u):
    p = ModelParams(7.0)
    X = _sphere(v)
    f = dynamics_rhs(X, u, p)
    assert np.allclose(f, generator(u, p) @ X, atol=1e-14)
    assert abs(f @ X) < 1e-13


@given(vec3, vec3, ctrl)
def test_gauge_drift_is_running_cost(v, w, u):
    # d(P.X)/dt = x1^2 for the normal flow
    p = ModelParams(10.0)
    X = _sphere(v)
    P = np.asarray(w, float)
    d = adjoint_rhs(X, P, u, p) @ X + P @ dynamics_rhs(X, u, p)
    assert d == pytest.approx(X[0] ** 2, abs=1e-12)


@given(vec3, vec3)
def test_switching_function_definition(v, w):
    X = _sphere(v)
    P = np.asarray(w, float)
    assert switching_fn(X, P) == pytest.approx(P @ OMEGA1 @ X, abs=1e-14)
    Pt = reduced_adjoint(X, P)
    assert abs(Pt @ X) < 1e-13
    # Phi is unchanged by the gauge
    assert switching_fn(X, Pt) == pytest.approx(switching_fn(X, P), abs=1e-13)


def _flow(y0, u, p, ts):
    sol = solve_ivp(lambda t, y: extremal_rhs(y, u, p), (ts[0], ts[-1]), y0, method="DOP853",
                    rtol=1e-13, atol=1e-15, t_eval=ts, dense_output=True)
    return sol


@pytest.mark.parametrize("u", [-1.0, 1.0])
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_switching_derivatives_vs_finite_differences(u, seed):
    # independent oracle: scipy DOP853 flow + 5-point central differences
    p = ModelParams(10.0)
    rng = np.random.default_rng(seed)
    X = _sphere(rng.normal(size=3))
    P = rng.normal(size=3)
    sol = _flow(np.concatenate([X, P, [0.0]]), u, p, np.array([-0.05, 0.05]))
    h = 2e-3

    def d(k, t):
        y = sol.sol(t)
        return switching_derivatives(y[:3], y[3:6], u, p)[k]

    for t in (-0.02, 0.0, 0.015):
        vals = switching_derivatives(*np.split(sol.sol(t)[:6], 2), u, p)
        for k in range(1, 5):
            fd = (d(k - 1, t - 2 * h) - 8 * d(k - 1, t - h) + 8 * d(k - 1, t + h) - d(k - 1, t + 2 * h)) / (12 * h)
            scale = max(abs(vals[k]), 1e-3 * p.delta**k)
            assert abs(fd - vals[k]) / scale < 1e-6, (k, t, fd, vals[k])


@pytest.mark.parametrize("delta", [3.0, 10.0, 14.0])
@pytest.mark.parametrize("u", [-1.0, 1.0])
def test_target_configuration_derivatives(delta, u):
    d = switching_derivatives([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], u, ModelParams(delta))
    assert max(abs(v) for v in d[:4]) < 1e-12
    assert d[4] == pytest.approx(-u * delta**2, abs=1e-9)


def test_hamiltonian_constant_on_bang_arc(rng):
    p = ModelParams(10.0)
    X = _sphere(rng.normal(size=3))
    P = rng.normal(size=3)
    ts = np.linspace(0, 1.0, 50)
    sol = _flow(np.concatenate([X, P, [0.0]]), 1.0, p, ts)
    H = [pontryagin_hamiltonian(y[:3], y[3:6], 1.0, p) for y in sol.y.T]
    assert np.ptp(H) < 1e-10


def test_amplitude_roundtrip(rng):
    for _ in range(10):
        x = rng.normal(size=6)
        assert np.allclose(amplitudes_to_real(real_to_amplitudes(x)), x, atol=0)


def test_six_dimensional_decoupling_against_expm(rng):
    # oracle: complex propagator exp(-i H t) acting on the amplitudes
    p = ModelParams(10.0)
    for _ in range(10):
        u = rng.uniform(-1, 1)
        X = _sphere(rng.normal(size=3))
        x6 = np.concatenate([X, np.zeros(3)])
        c1 = expm(-1j * schrodinger_hamiltonian(u, p)) @ real_to_amplitudes(x6)
        full = amplitudes_to_real(c1)
        reduced = expm(p.delta * OMEGA3 + u * OMEGA1) @ X
        assert np.max(np.abs(full[:3] - reduced)) < 1e-10
        assert np.max(np.abs(full[3:])) < 1e-10


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=6, max_size=6), ctrl)
def test_six_dimensional_rhs_block_structure(x, u):
    p = ModelParams(10.0)
    x = np.asarray(x)
    f = full_schrodinger_rhs(x, u, p)
    assert np.allclose(f[:3], dynamics_rhs(x[:3], u, p), atol=1e-13)
    assert np.allclose(f[3:], dynamics_rhs(x[3:], u, p), atol=1e-13)
    assert abs(f @ x) < 1e-12
