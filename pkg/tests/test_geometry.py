import numpy as np
import pytest

from slowmanifold.errors import InvalidMetric, ZeroVector
from slowmanifold.geometry import (Cotangent, MetricField, Tangent, angle,
                                   conorm, euclidean_metric, flat, norm,
                                   orthonormal_complement, pairing, sharp)

P = np.zeros(2)


def diag_metric(*entries):
    d = np.array(entries, dtype=float)
    return MetricField(d.size, lambda p: np.diag(d))


def random_spd(rng, q):
    A = rng.standard_normal((q, q))
    return A @ A.T + q * np.eye(q)


def test_norm_identity_metric():
    assert norm(Tangent(P, [1.0, 0.0]), euclidean_metric(2)) == 1.0


def test_norm_zero_vector():
    g = diag_metric(4.0, 9.0)
    assert norm(Tangent(P, [0.0, 0.0]), g) == 0.0


def test_norm_diagonal_metric():
    g = diag_metric(4.0, 9.0)
    assert norm(Tangent(P, [1.0, 1.0]), g) == pytest.approx(np.sqrt(13.0))


def test_conorm_identity():
    assert conorm(Cotangent(P, [1.0, 0.0]), euclidean_metric(2)) == 1.0


def test_conorm_diagonal_inverse():
    g = diag_metric(4.0, 1.0)
    assert conorm(Cotangent(P, [2.0, 0.0]), g) == pytest.approx(1.0)


def test_conorm_agrees_with_norm_of_sharp():
    rng = np.random.default_rng(3)
    g = MetricField(3, lambda p: random_spd(np.random.default_rng(0), 3))
    for _ in range(10):
        w = Cotangent(np.zeros(3), rng.standard_normal(3))
        assert conorm(w, g) == pytest.approx(norm(sharp(w, g), g), rel=1e-12)


def test_flat_identity_metric():
    w = flat(Tangent(P, [1.0, 0.0]), euclidean_metric(2))
    assert np.allclose(w.components, [1.0, 0.0])


def test_flat_diagonal_metric():
    w = flat(Tangent(P, [1.0, 0.0]), diag_metric(4.0, 1.0))
    assert np.allclose(w.components, [4.0, 0.0])


def test_sharp_flat_roundtrip():
    rng = np.random.default_rng(5)
    g = MetricField(4, lambda p: random_spd(np.random.default_rng(1), 4))
    for _ in range(10):
        v = Tangent(np.zeros(4), rng.standard_normal(4))
        back = sharp(flat(v, g), g)
        assert np.allclose(back.components, v.components, atol=1e-12)


def test_musical_isometry():
    rng = np.random.default_rng(7)
    g = MetricField(3, lambda p: random_spd(np.random.default_rng(2), 3))
    for _ in range(10):
        v = Tangent(np.zeros(3), rng.standard_normal(3))
        assert conorm(flat(v, g), g) == pytest.approx(norm(v, g), rel=1e-12)


def test_norm_squared_equals_pairing_with_flat():
    rng = np.random.default_rng(11)
    g = MetricField(3, lambda p: random_spd(np.random.default_rng(4), 3))
    for _ in range(20):
        v = Tangent(np.zeros(3), rng.standard_normal(3))
        assert norm(v, g) ** 2 == pytest.approx(pairing(flat(v, g), v),
                                                rel=1e-10)


def test_angle_same_vector_zero():
    g = euclidean_metric(2)
    assert angle(Tangent(P, [1.0, 0.0]), Tangent(P, [1.0, 0.0]), g) == 0.0


def test_angle_orthogonal():
    g = euclidean_metric(2)
    a = angle(Tangent(P, [1.0, 0.0]), Tangent(P, [0.0, 1.0]), g)
    assert a == pytest.approx(np.pi / 2)


def test_angle_45_degrees():
    g = euclidean_metric(2)
    a = angle(Tangent(P, [1.0, 0.0]), Tangent(P, [1.0, 1.0]), g)
    assert a == pytest.approx(np.pi / 4)


def test_angle_symmetric_and_scale_invariant():
    rng = np.random.default_rng(13)
    g = MetricField(3, lambda p: random_spd(np.random.default_rng(6), 3))
    for _ in range(10):
        u = Tangent(np.zeros(3), rng.standard_normal(3))
        w = Tangent(np.zeros(3), rng.standard_normal(3))
        a = angle(u, w, g)
        assert a == pytest.approx(angle(w, u, g), abs=1e-12)
        u2 = Tangent(u.base, 3.7 * u.components)
        assert a == pytest.approx(angle(u2, w, g), abs=1e-10)


def test_angle_zero_vector_raises():
    g = euclidean_metric(2)
    with pytest.raises(ZeroVector):
        angle(Tangent(P, [0.0, 0.0]), Tangent(P, [1.0, 0.0]), g)


def test_orthonormal_complement_properties():
    rng = np.random.default_rng(17)
    g = MetricField(4, lambda p: random_spd(np.random.default_rng(8), 4))
    x = Tangent(np.zeros(4), rng.standard_normal(4))
    B = orthonormal_complement(x, g)
    assert B.shape == (4, 3)
    G = g.matrix(x.base)
    gram = B.T @ G @ B
    assert np.allclose(gram, np.eye(3), atol=1e-10)
    assert np.allclose(B.T @ G @ x.components, 0.0, atol=1e-10)


def test_orthonormal_complement_zero_raises():
    with pytest.raises(ZeroVector):
        orthonormal_complement(Tangent(P, [0.0, 0.0]), euclidean_metric(2))


def test_non_spd_metric_rejected():
    g = MetricField(2, lambda p: np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(InvalidMetric):
        norm(Tangent(P, [1.0, 1.0]), g)


def test_asymmetric_metric_rejected():
    g = MetricField(2, lambda p: np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(InvalidMetric):
        g.matrix(P)


def test_wrong_shape_metric_rejected():
    g = MetricField(2, lambda p: np.eye(3))
    with pytest.raises(InvalidMetric):
        g.matrix(P)
