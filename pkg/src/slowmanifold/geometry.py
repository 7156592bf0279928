"""Riemannian inner products, norms, musical isomorphisms, and angles.

Phase space is a single coordinate domain (an open subset of R^q) carrying a
state-dependent symmetric positive-definite metric tensor G(p). All
operations here are pure functions of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMetric, ZeroVector

_SYM_RTOL = 1e-12


class MetricField:
    """State-dependent SPD metric tensor on a coordinate domain.

    Parameters
    ----------
    dim : int
        Dimension q of the coordinate domain.
    matrix_fn : callable or None
        Map p -> G(p), a (q, q) array. None means the Euclidean metric
        (identity matrix), which enables cheap fast paths downstream.

    Evaluations are cached per base point, so repeated norm/flat/sharp calls
    along one propagation pass factorize each G(p) once.
    """

    def __init__(self, dim, matrix_fn=None):
        if dim < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)
        self._fn = matrix_fn
        self._cache = {}

    @property
    def is_euclidean(self):
        return self._fn is None

    def matrix(self, p):
        """Return G(p), validated symmetric positive definite."""
        if self._fn is None:
            return np.eye(self.dim)
        return self._eval(p)[0]

    def cholesky(self, p):
        """Lower-triangular L with G(p) = L L^T."""
        if self._fn is None:
            return np.eye(self.dim)
        return self._eval(p)[1]

    def _eval(self, p):
        p = np.asarray(p, dtype=float)
        key = p.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        G = np.asarray(self._fn(p), dtype=float)
        if G.shape != (self.dim, self.dim):
            raise InvalidMetric(f"metric returned shape {G.shape}, expected "
                                f"({self.dim}, {self.dim})")
        scale = max(np.abs(G).max(), 1.0)
        if np.abs(G - G.T).max() > _SYM_RTOL * scale:
            raise InvalidMetric("metric tensor is not symmetric")
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError as exc:
            raise InvalidMetric("metric tensor is not positive definite") from exc
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = (G, L)
        return G, L


def euclidean_metric(dim):
    return MetricField(dim)


@dataclass(frozen=True)
class Tangent:
    """Tangent vector: components attached to a base point."""
    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "components",
                           np.asarray(self.components, dtype=float))


@dataclass(frozen=True)
class Cotangent:
    """Cotangent vector (covector): components attached to a base point."""
    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "components",
                           np.asarray(self.components, dtype=float))


def pairing(omega: Cotangent, v: Tangent) -> float:
    """Natural pairing omega(v); bilinear in the components."""
    return float(np.dot(omega.components, v.components))


def norm(v: Tangent, g: MetricField) -> float:
    """Metric norm sqrt(v^T G(p) v); zero iff the components are zero."""
    c = v.components
    if g.is_euclidean:
        return float(np.linalg.norm(c))
    L = g.cholesky(v.base)
    return float(np.linalg.norm(L.T @ c))


def conorm(omega: Cotangent, g: MetricField) -> float:
    """Dual norm sqrt(omega^T G(p)^{-1} omega)."""
    c = omega.components
    if g.is_euclidean:
        return float(np.linalg.norm(c))
    L = g.cholesky(omega.base)
    y = np.linalg.solve(L, c)
    return float(np.linalg.norm(y))


def flat(v: Tangent, g: MetricField) -> Cotangent:
    """Lower an index: v -> G(p) v."""
    if g.is_euclidean:
        return Cotangent(v.base, v.components.copy())
    G = g.matrix(v.base)
    return Cotangent(v.base, G @ v.components)


def sharp(omega: Cotangent, g: MetricField) -> Tangent:
    """Raise an index: omega -> G(p)^{-1} omega."""
    if g.is_euclidean:
        return Tangent(omega.base, omega.components.copy())
    G = g.matrix(omega.base)
    return Tangent(omega.base, np.linalg.solve(G, omega.components))


def inner(u: Tangent, w: Tangent, g: MetricField) -> float:
    """Metric inner product <u, w>_g at the common base point."""
    if g.is_euclidean:
        return float(np.dot(u.components, w.components))
    G = g.matrix(u.base)
    return float(u.components @ G @ w.components)


def angle(u: Tangent, w: Tangent, g: MetricField) -> float:
    """Angle in [0, pi] between nonzero tangent vectors at one base point."""
    nu = norm(u, g)
    nw = norm(w, g)
    if nu == 0.0 or nw == 0.0:
        raise ZeroVector("angle requires nonzero vectors")
    c = inner(u, w, g) / (nu * nw)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def orthonormal_complement(x: Tangent, g: MetricField) -> np.ndarray:
    """g-orthonormal basis of the orthogonal complement of x at x.base.

    Returns a (q, q-1) array B with <B_i, B_j>_g = delta_ij and
    <B_i, x>_g = 0. Computed by whitening with the Cholesky factor of G and
    taking the Euclidean complement there.
    """
    q = x.components.size
    if g.is_euclidean:
        L = np.eye(q)
        xw = x.components
    else:
        L = g.cholesky(x.base)
        xw = L.T @ x.components
    nx = np.linalg.norm(xw)
    if nx == 0.0:
        raise ZeroVector("orthonormal_complement requires a nonzero vector")
    # QR of [x_whitened | I] yields an orthonormal frame whose trailing
    # columns span the Euclidean complement of x in whitened coordinates.
    Q, _ = np.linalg.qr(np.column_stack([xw / nx, np.eye(q)]))
    Bw = Q[:, 1:q]
    if g.is_euclidean:
        return Bw
    return np.linalg.solve(L.T, Bw)
