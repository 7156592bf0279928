import numpy as np
import pytest

from slowmanifold.errors import InvalidParameter
from slowmanifold.models import (davis_skodje, finite_difference_jacobian,
                                 linear_model, michaelis_menten)


def test_davis_skodje_origin_equilibrium():
    ds = davis_skodje(2.0)
    assert np.allclose(ds.field([0.0, 0.0]), 0.0)


def test_davis_skodje_gamma_validation():
    with pytest.raises(InvalidParameter):
        davis_skodje(1.0)
    with pytest.raises(InvalidParameter):
        davis_skodje(0.5)


def test_davis_skodje_guard():
    ds = davis_skodje(2.0)
    assert ds.admissible([0.5, 0.0])
    assert not ds.admissible([-1.5, 0.0])


def test_davis_skodje_oracle_flow_preserves_graph():
    ds = davis_skodje(2.0)
    graph = ds.oracles.invariant_graph
    for x0 in (0.2, 1.0, 3.0):
        p0 = np.array([x0, graph(x0)])
        for t in (0.5, 1.0, 2.0, 5.0):
            x, y = ds.oracles.flow(p0, t)
            assert y == pytest.approx(graph(x), abs=1e-12)


def test_davis_skodje_oracle_satisfies_ode():
    # Differentiate the closed-form flow numerically and compare with the
    # field along a trajectory: the oracle must solve the ODE it claims to.
    ds = davis_skodje(2.0)
    p0 = np.array([1.0, 1.0])
    h = 1e-6
    for t in np.linspace(0.0, 5.0, 11):
        state = ds.oracles.flow(p0, t)
        deriv = (ds.oracles.flow(p0, t + h) - ds.oracles.flow(p0, t - h)) \
            / (2 * h)
        assert np.allclose(deriv, ds.field(state), atol=1e-8)


def test_michaelis_menten_origin_equilibrium():
    mm = michaelis_menten(1.0, 1.0, 1.0)
    assert np.allclose(mm.field([0.0, 0.0]), 0.0)


def test_michaelis_menten_field_value():
    mm = michaelis_menten(1.0, 1.0, 1.0)
    assert np.allclose(mm.field([1.0, 0.0]), [-1.0, 1.0])


def test_michaelis_menten_origin_jacobian():
    c = 1.0
    mm = michaelis_menten(c, c, c)
    J = mm.jacobian([0.0, 0.0])
    assert np.allclose(J, [[-1.0, 0.0], [c, c * c]])


def test_michaelis_menten_rejects_nonfinite():
    with pytest.raises(InvalidParameter):
        michaelis_menten(np.inf, 1.0, 1.0)


def test_linear_model_shape_validation():
    with pytest.raises(InvalidParameter):
        linear_model(np.ones((2, 3)))
    with pytest.raises(InvalidParameter):
        linear_model([[np.nan, 0.0], [0.0, 1.0]])


def test_linear_model_zero_matrix_flow_identity():
    lm = linear_model(np.zeros((2, 2)))
    p = np.array([0.3, -0.7])
    for t in (0.0, 1.0, 10.0):
        assert np.allclose(lm.oracles.flow(p, t), p)


def test_linear_model_adjoint_oracle():
    A = np.diag([-1.0, -3.0])
    lm = linear_model(A)
    t = 0.7
    N = lm.oracles.adjoint_propagator(None, t)
    assert np.allclose(N, np.diag([np.exp(t), np.exp(3 * t)]), rtol=1e-12)


@pytest.mark.parametrize("make_model,sampler", [
    (lambda: davis_skodje(2.0),
     lambda rng: np.array([rng.uniform(-0.5, 2.0), rng.uniform(-1.0, 2.0)])),
    (lambda: davis_skodje(10.0),
     lambda rng: np.array([rng.uniform(-0.5, 2.0), rng.uniform(-1.0, 2.0)])),
    (lambda: michaelis_menten(1.0, 1.0, 1.0),
     lambda rng: rng.uniform(-1.0, 1.0, size=2)),
    (lambda: linear_model([[-1.0, 0.5], [0.0, -3.0]]),
     lambda rng: rng.uniform(-1.0, 1.0, size=2)),
])
def test_jacobian_matches_finite_differences(make_model, sampler):
    model = make_model()
    rng = np.random.default_rng(42)
    for _ in range(100):
        p = sampler(rng)
        if not model.admissible(p):
            continue
        J = model.jacobian(p)
        J_fd = finite_difference_jacobian(model.field_fn, p)
        scale = max(np.abs(J).max(), 1.0)
        assert np.abs(J - J_fd).max() <= 1e-5 * scale


def test_field_and_jacobian_finite_on_admissible_states():
    ds = davis_skodje(2.0)
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = np.array([rng.uniform(-0.9, 3.0), rng.uniform(-2.0, 2.0)])
        assert np.all(np.isfinite(ds.field(p)))
        assert np.all(np.isfinite(ds.jacobian(p)))


def test_speed_is_metric_norm_of_field():
    ds = davis_skodje(2.0)
    p = np.array([0.4, 0.1])
    assert ds.speed(p) == pytest.approx(np.linalg.norm(ds.field(p)))
