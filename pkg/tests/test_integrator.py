import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from chattering.dynamics import (
    OMEGA1,
    OMEGA3,
    ModelParams,
    extremal_rhs,
    pontryagin_hamiltonian,
    switching_fn,
)
from chattering.integrator import (
    B,
    E,
    DenseStep,
    IntegratorSettings,
    concatenate_extremal,
    dp5_step,
    integrate_bang_arc,
    propagate,
)
from chattering.synthesis import seed_adjoint, seed_controls


def test_tableau_consistency():
    assert B.sum() == pytest.approx(1.0, abs=1e-15)
    assert E.sum() == pytest.approx(0.0, abs=1e-15)


def test_settings_validation():
    with pytest.raises(ValueError):
        IntegratorSettings(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorSettings(max_switchings=0)


def test_local_error_order():
    # local error of the 5th-order solution scales as h^6
    f = lambda t, y: np.array([np.cos(t) * y[0]])  # noqa: E731
    exact = lambda t: np.exp(np.sin(t))  # noqa: E731
    errs = []
    hs = [0.1, 0.05, 0.025]
    for h in hs:
        y1, _, _ = dp5_step(f, 0.3, np.array([exact(0.3)]), h)
        errs.append(abs(y1[0] - exact(0.3 + h)))
    slopes = np.diff(np.log(errs)) / np.diff(np.log(hs))
    assert np.all(slopes > 5.5)


@pytest.mark.parametrize("t1", [1.7, -1.3])
def test_propagate_linear_against_expm(t1, rng):
    p = ModelParams(10.0)
    A = p.delta * OMEGA3 + 0.4 * OMEGA1
    x0 = rng.normal(size=3)
    y, steps = propagate(lambda t, y: A @ y, x0, 0.0, t1, rtol=1e-12, atol=1e-14)
    assert np.max(np.abs(y - expm(A * t1) @ x0)) < 1e-10
    # dense output inside every step
    for s in steps[::7]:
        tm = s.t0 + 0.37 * s.h
        assert np.max(np.abs(s(tm) - expm(A * tm) @ x0)) < 1e-9


def test_dense_step_endpoints(rng):
    f = lambda t, y: np.array([y[1], -y[0]])  # noqa: E731
    y0 = rng.normal(size=2)
    y1, _, K = dp5_step(f, 0.0, y0, 0.2)
    d = DenseStep.from_stages(0.0, 0.2, y0, y1, K)
    assert np.allclose(d(0.0), y0, atol=1e-15)
    assert np.allclose(d(0.2), y1, atol=1e-14)
    assert d.eval_theta([0.0, 0.5, 1.0]).shape == (3, 2)


def _seed(x20=3e-4):
    p = ModelParams(10.0)
    sd = seed_adjoint(x20, p)
    return p, sd.X0, sd.P0, seed_controls(x20)[0]


def test_zero_control_never_switches():
    p, X0, P0, _ = _seed()
    arc, event, _, _ = integrate_bang_arc(X0, P0, 0.0, -1, IntegratorSettings(), p, t_limit=-0.5)
    assert event == "max-time"
    assert arc.t_end == pytest.approx(-0.5)


def test_switch_events_are_accurate():
    p, X0, P0, u0 = _seed()
    tr = concatenate_extremal(X0, P0, u0, -1, IntegratorSettings(), p, t_limit=-2.0)
    assert tr.n_switchings >= 5
    for sp in tr.switch_points:
        assert abs(switching_fn(sp.X, sp.P)) < 1e-12
        assert sp.u_before == -sp.u_after
    # controls alternate between consecutive arcs
    us = [a.u for a in tr.arcs]
    assert all(a == -b for a, b in zip(us, us[1:]))


def test_conservation_along_extremal():
    p, X0, P0, u0 = _seed(5e-4)
    tr = concatenate_extremal(X0, P0, u0, -1, IntegratorSettings(), p, t_limit=-2.6)
    rows = tr.samples()
    H = np.array([pontryagin_hamiltonian(r[1:4], r[4:7], r[7], p) for r in rows])
    assert np.max(np.abs(H)) < 1e-9
    assert np.max(np.abs(np.linalg.norm(rows[:, 1:4], axis=1) - 1.0)) < 1e-10
    assert tr.max_hamiltonian < 1e-9


def test_arc_cost_against_gauss_quadrature():
    # oracle: 8-point Gauss-Legendre of x1^2 on every dense step
    p, X0, P0, u0 = _seed(5e-4)
    tr = concatenate_extremal(X0, P0, u0, -1, IntegratorSettings(), p, t_limit=-1.5)
    nodes, weights = np.polynomial.legendre.leggauss(8)
    total = 0.0
    for arc in tr.arcs:
        q = 0.0
        for s in arc.steps:
            th = 0.5 * (nodes + 1.0)
            vals = s.eval_theta(th)[:, 0] ** 2
            q += 0.5 * abs(s.h) * float(weights @ vals)
        assert arc.cost == pytest.approx(q, rel=1e-9, abs=1e-20)
        total += q
    assert tr.cost_accumulated == pytest.approx(total, rel=1e-9)


def test_backward_then_forward_returns_to_seed():
    p, X0, P0, u0 = _seed(4e-4)
    settings = IntegratorSettings()
    tr = concatenate_extremal(X0, P0, u0, -1, settings, p, t_limit=-1.0)
    # replay the arcs forward with their controls from the earliest state
    y = tr.arcs[-1].steps[-1].y1.copy()
    t = tr.arcs[-1].t_end
    for arc in reversed(tr.arcs):
        y, _ = propagate(lambda s, z, u=arc.u: extremal_rhs(z, u, p), y, t, arc.t_start,
                         rtol=1e-13, atol=1e-16, max_step=0.01)
        t = arc.t_start
    assert np.max(np.abs(y[:3] - X0)) < 1e-9
    # P shrinks by orders of magnitude toward the seed: compare on the scale of the trajectory
    p_scale = np.max(np.abs(tr.samples()[:, 4:7]))
    assert np.max(np.abs(y[3:6] - P0)) / p_scale < 1e-9


def test_stop_predicate_truncates():
    p, X0, P0, u0 = _seed(5e-4)
    stop = lambda t, X, P: X[2] < 0.999  # noqa: E731
    tr = concatenate_extremal(X0, P0, u0, -1, IntegratorSettings(), p, stop=stop, t_limit=-4.0)
    assert tr.t_end > -4.0
    assert tr.samples()[:, 3].min() < 0.999


@given(st.floats(1e-5, 2e-3), st.sampled_from([-1, 1]))
def test_samples_are_time_ordered(x20, sign):
    p, X0, P0, u0 = _seed(sign * x20)
    tr = concatenate_extremal(X0, P0, u0, -1, IntegratorSettings(max_step=0.05), p, t_limit=-0.3)
    rows = tr.samples()
    assert np.all(np.diff(rows[:, 0]) >= 0)
    assert set(np.unique(rows[:, 7])) <= {-1.0, 1.0}
