import numpy as np
import pytest
from scipy.linalg import expm

from slowmanifold.errors import BlowUp, DomainExit, DomainTruncated
from slowmanifold.flow import (frame_at, integrate, propagate_frames,
                               sample_trajectory, trajectory_domain)
from slowmanifold.models import davis_skodje, linear_model, michaelis_menten

A_DIAG = np.diag([-1.0, -3.0])


def test_integrate_time_zero_is_identity():
    lm = linear_model(A_DIAG)
    p = np.array([0.4, -0.2])
    assert np.allclose(integrate(lm, p, 0.0), p)


def test_integrate_linear_against_matrix_exponential():
    lm = linear_model(A_DIAG)
    got = integrate(lm, [1.0, 1.0], 1.0)
    assert np.allclose(got, [np.exp(-1.0), np.exp(-3.0)], atol=1e-9)


def test_integrate_davis_skodje_against_closed_form():
    ds = davis_skodje(2.0)
    p = np.array([1.0, 1.0])
    got = integrate(ds, p, 2.0)
    assert np.abs(got - ds.oracles.flow(p, 2.0)).max() <= 1e-7


def test_integrate_backward():
    ds = davis_skodje(2.0)
    p = np.array([0.5, 0.4])
    got = integrate(ds, p, -1.0)
    assert np.abs(got - ds.oracles.flow(p, -1.0)).max() <= 1e-7


def test_semigroup_property():
    ds = davis_skodje(2.0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        p = np.array([rng.uniform(0.1, 1.5), rng.uniform(-0.5, 1.0)])
        s, t = rng.uniform(0.1, 2.0, size=2)
        once = integrate(ds, p, s + t)
        twice = integrate(ds, integrate(ds, p, s), t)
        assert np.abs(once - twice).max() <= 1e-7


def test_frame_at_zero_is_identity():
    for model in (linear_model(A_DIAG), davis_skodje(2.0),
                  michaelis_menten(1.0, 1.0, 1.0)):
        frames, _ = propagate_frames(model, np.array([0.3, 0.2]), [0.0])
        fr = frames[0]
        assert fr.t == 0.0
        assert np.allclose(fr.M, np.eye(2))
        assert np.allclose(fr.N_adj, np.eye(2))


def test_propagators_match_matrix_exponentials():
    A = np.array([[-1.0, 0.5], [0.2, -2.0]])
    lm = linear_model(A)
    for t in (-1.0, 0.5, 2.0):
        fr = frame_at(lm, np.array([0.2, 0.1]), t)
        assert np.allclose(fr.M, expm(A * t), atol=1e-7)
        assert np.allclose(fr.N_adj, expm(-A.T * t), atol=1e-7)


def test_adjoint_is_inverse_transpose():
    for model, p in ((davis_skodje(2.0), np.array([0.5, 0.3])),
                     (michaelis_menten(1.0, 1.0, 1.0),
                      np.array([0.2, -0.1]))):
        fr = frame_at(model, p, 1.5)
        assert np.abs(fr.N_adj @ fr.M.T - np.eye(2)).max() <= 1e-6


def test_tangent_propagator_nonsingular():
    ds = davis_skodje(2.0)
    frames, _ = propagate_frames(ds, np.array([0.8, 0.6]),
                                 np.linspace(-1.0, 3.0, 9))
    for fr in frames:
        assert abs(np.linalg.det(fr.M)) > 0.0


def test_tangent_propagation_preserves_invariant_tangent():
    # On the known invariant curve the propagator must map the curve tangent
    # at p to the curve tangent at the flowed point, up to scale.
    ds = davis_skodje(2.0)
    x0 = 0.5
    p = np.array([x0, x0 / (1.0 + x0)])
    fr = frame_at(ds, p, 1.0)
    x1 = fr.state[0]
    tangent = lambda x: np.array([1.0, 1.0 / (1.0 + x) ** 2])
    v1 = fr.M @ tangent(x0)
    v1 /= np.linalg.norm(v1)
    ref = tangent(x1) / np.linalg.norm(tangent(x1))
    assert np.abs(v1 - ref).max() <= 1e-6


def test_duality_pairing_preserved():
    ds = davis_skodje(2.0)
    rng = np.random.default_rng(1)
    fr = frame_at(ds, np.array([0.7, 0.4]), 2.0)
    for _ in range(10):
        v = rng.standard_normal(2)
        w = rng.standard_normal(2)
        before = w @ v
        after = (fr.N_adj @ w) @ (fr.M @ v)
        assert abs(after - before) <= 1e-6 * max(abs(before), 1.0)


def test_tolerance_refinement_reduces_error():
    ds = davis_skodje(2.0)
    rng = np.random.default_rng(2)
    p = np.array([rng.uniform(0.5, 1.5), rng.uniform(-0.5, 1.0)])
    exact = ds.oracles.flow(p, 5.0)
    err_loose = np.abs(integrate(ds, p, 5.0, tol=(1e-5, 1e-7)) - exact).max()
    err_tight = np.abs(integrate(ds, p, 5.0, tol=(1e-10, 1e-12)) - exact).max()
    assert err_tight < err_loose


def test_trajectory_domain_untruncated_stable_linear():
    lm = linear_model(A_DIAG)
    dom = trajectory_domain(lm, np.array([0.1, 0.01]), 10.0)
    assert dom.t_min == -10.0 and dom.t_max == 10.0
    assert dom.backward_reason is None and dom.forward_reason is None
    assert dom.contains(0.0)


def test_trajectory_domain_backward_truncation_at_guard():
    # x(t) = x0 e^{-t} reaches -1 backward at t = -log 2; the source term
    # diverges there, so the guard and the blow-up bound race and either
    # reason is a faithful truncation report
    ds = davis_skodje(2.0)
    p = np.array([-0.5, 0.0])
    dom = trajectory_domain(ds, p, 10.0)
    assert dom.backward_reason in ("domain_exit", "blow_up")
    assert dom.t_min == pytest.approx(-np.log(2.0), abs=1e-6)
    assert dom.t_max == 10.0


def guarded_drift_model():
    from slowmanifold.models import ModelSpec
    return ModelSpec(
        name="drift", dim=2,
        field_fn=lambda p: np.array([-1.0, 0.0]),
        jacobian_fn=lambda p: np.zeros((2, 2)),
        guard_fn=lambda p: p[0] + 1.0)


def test_integrate_raises_domain_exit():
    model = guarded_drift_model()
    with pytest.raises(DomainExit) as err:
        integrate(model, np.array([0.0, 0.0]), 5.0)
    assert err.value.t_reached == pytest.approx(1.0, abs=1e-9)


def test_trajectory_domain_forward_domain_exit():
    model = guarded_drift_model()
    dom = trajectory_domain(model, np.array([0.0, 0.0]), 5.0)
    assert dom.forward_reason == "domain_exit"
    assert dom.t_max == pytest.approx(1.0, abs=1e-9)
    assert dom.backward_reason is None and dom.t_min == -5.0


def test_integrate_raises_blowup():
    lm = linear_model(np.diag([2.0, 2.0]))
    with pytest.raises(BlowUp):
        integrate(lm, np.array([1.0, 1.0]), 30.0)


def test_propagate_frames_truncation_is_data():
    ds = davis_skodje(2.0)
    grid = np.arange(-3.0, 1.5, 0.5)
    frames, dom = propagate_frames(ds, np.array([-0.5, 0.0]), grid)
    times = [fr.t for fr in frames]
    assert dom.backward_reason in ("domain_exit", "blow_up")
    assert min(times) >= dom.t_min
    assert 0.0 in times


def test_propagate_frames_grid_validation():
    ds = davis_skodje(2.0)
    with pytest.raises(ValueError):
        propagate_frames(ds, np.zeros(2), [1.0, 0.5, 0.0])
    with pytest.raises(ValueError):
        propagate_frames(ds, np.zeros(2), [0.5, 1.0])


def test_sample_trajectory_requires_zero():
    ds = davis_skodje(2.0)
    with pytest.raises(ValueError):
        sample_trajectory(ds, np.zeros(2), [0.5, 1.0])


def test_frame_at_outside_domain_raises():
    ds = davis_skodje(2.0)
    with pytest.raises(DomainTruncated):
        frame_at(ds, np.array([-0.5, 0.0]), -2.0)


def test_stiff_integrator_matches_default_on_smooth_model():
    ds = davis_skodje(2.0)
    p = np.array([1.0, 1.0])
    exact = ds.oracles.flow(p, 2.0)
    got = integrate(ds, p, 2.0, stiff=True)
    assert np.abs(got - exact).max() <= 1e-5
