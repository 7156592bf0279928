"""Finite-time Lyapunov exponents, adjoint exponents, and subspace extrema.

All exponents here are finite-time quantities read off a PropagatedFrame:

    ftle(frame, v)          growth rate of a tangent vector under M(t)
    adjoint_ftle(frame, w)  growth rate of a covector under N_adj(t)

Asymptotic (forward/backward) exponents are represented only as finite-time
values at the largest admissible |t| on a horizon; no extrapolation in t is
attempted.

Values are extended reals: the zero vector maps to -inf.
"""

from __future__ import annotations

import numpy as np

from .errors import ZeroVector
from .geometry import (Cotangent, MetricField, Tangent, conorm, norm,
                       orthonormal_complement)


def ftle(frame, v: Tangent, g: MetricField) -> float:
    """Finite-time Lyapunov exponent of a tangent vector.

    (1/|t|) * log( ||M(t) v|| at Phi^t(p) / ||v|| at p ). Returns -inf for
    the zero vector. frame.t must be nonzero.
    """
    if frame.t == 0.0:
        raise ValueError("finite-time exponent undefined at t = 0")
    c = np.asarray(v.components, dtype=float)
    if not np.any(c):
        return float("-inf")
    num = norm(Tangent(frame.state, frame.M @ c), g)
    den = norm(Tangent(frame.base, c), g)
    return float(np.log(num / den) / abs(frame.t))


def adjoint_ftle(frame, omega: Cotangent, g: MetricField) -> float:
    """Finite-time adjoint Lyapunov exponent of a covector.

    (1/|t|) * log( ||N_adj(t) omega|| at Phi^t(p) / ||omega|| at p ) with
    dual norms; -inf for the zero covector.
    """
    if frame.t == 0.0:
        raise ValueError("finite-time exponent undefined at t = 0")
    c = np.asarray(omega.components, dtype=float)
    if not np.any(c):
        return float("-inf")
    num = conorm(Cotangent(frame.state, frame.N_adj @ c), g)
    den = conorm(Cotangent(frame.base, c), g)
    return float(np.log(num / den) / abs(frame.t))


def _whitened_adjoint(frame, g: MetricField):
    """L_end^{-1} N_adj, so Euclidean norms of its products are conorms."""
    if g.is_euclidean:
        return frame.N_adj
    L_end = g.cholesky(frame.state)
    return np.linalg.solve(L_end, frame.N_adj)


def extremal_adjoint_ftle_perp(frame, x: Tangent, g: MetricField, mode="min"):
    """Extremal adjoint exponent over unit covectors dual to the complement
    of x.

    Optimizes adjoint_ftle(w^flat) over unit tangent vectors w that are
    g-orthogonal to x, exactly by restricted singular values: with B a
    g-orthonormal basis of the complement, the candidate covectors are
    G(p) B y with |y| = 1 and unit conorm, and the exponent is
    (1/|t|) log sigma of the whitened adjoint propagator restricted to that
    subspace. mode "min" takes the smallest singular value, "max" the
    largest.

    Returns (value, omega) with omega the optimizing unit covector at the
    base point.
    """
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    if not np.any(np.asarray(x.components)):
        raise ZeroVector("extremal_adjoint_ftle_perp requires a nonzero field "
                         "vector")
    if frame.t == 0.0:
        raise ValueError("finite-time exponent undefined at t = 0")
    B = orthonormal_complement(x, g)          # (q, q-1), g-orthonormal
    if g.is_euclidean:
        C = B                                  # flat is the identity
    else:
        C = g.matrix(frame.base) @ B           # covector representatives
    A = _whitened_adjoint(frame, g) @ C        # (q, q-1)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    k = int(np.argmin(s)) if mode == "min" else int(np.argmax(s))
    sigma = s[k]
    y = Vt[k]
    omega_components = C @ y                   # unit conorm by construction
    value = float(np.log(sigma) / abs(frame.t))
    return value, Cotangent(frame.base, omega_components)


def extremal_ftle_subspace(frame, basis, g: MetricField, mode="max"):
    """Extremal tangent FTLE over the span of the given basis columns.

    basis is a (q, k) array of tangent components at frame.base. Computed by
    whitening both endpoint metrics and taking the extremal singular value of
    M(t) restricted to the subspace. Returns (value, unit tangent vector).
    """
    if frame.t == 0.0:
        raise ValueError("finite-time exponent undefined at t = 0")
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]
    if g.is_euclidean:
        Mw = frame.M
        Bw = basis
    else:
        L0 = g.cholesky(frame.base)
        L1 = g.cholesky(frame.state)
        Mw = L1.T @ frame.M @ np.linalg.inv(L0.T)
        Bw = L0.T @ basis
    # Orthonormalize the whitened subspace so singular values are growth
    # ratios of unit vectors.
    Q, _ = np.linalg.qr(Bw)
    U, s, Vt = np.linalg.svd(Mw @ Q, full_matrices=False)
    k = int(np.argmax(s)) if mode == "max" else int(np.argmin(s))
    y = Q @ Vt[k]
    if g.is_euclidean:
        v = y
    else:
        L0 = g.cholesky(frame.base)
        v = np.linalg.solve(L0.T, y)
    return float(np.log(s[k]) / abs(frame.t)), Tangent(frame.base, v)


def cocycle_residual(model, p, s, t, v, tol=None):
    """Residual of the finite-time cocycle identity.

    lambda^t(dPhi^s v) at Phi^s(p) should equal
    (|s+t|/|t|) lambda^{s+t}(v) - (|s|/|t|) lambda^s(v) at p.
    Returns |lhs - rhs|; a property test, expected small on smooth models.
    """
    from .flow import frame_at
    if t == 0.0:
        raise ValueError("cocycle identity requires t != 0")
    g = model.metric
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)

    frame_s = frame_at(model, p, s, tol=tol) if s != 0.0 else None
    if s == 0.0:
        base_q = p
        v_prop = v
    else:
        base_q = frame_s.state
        v_prop = frame_s.M @ v
    frame_t_at_q = frame_at(model, base_q, t, tol=tol)
    lhs = ftle(frame_t_at_q, Tangent(base_q, v_prop), g)

    frame_st = frame_at(model, p, s + t, tol=tol)
    lam_st = ftle(frame_st, Tangent(p, v), g)
    if s == 0.0:
        lam_s = 0.0
        rhs = (abs(s + t) / abs(t)) * lam_st
    else:
        lam_s = ftle(frame_at(model, p, s, tol=tol), Tangent(p, v), g)
        rhs = (abs(s + t) / abs(t)) * lam_st - (abs(s) / abs(t)) * lam_s
    return abs(lhs - rhs)
