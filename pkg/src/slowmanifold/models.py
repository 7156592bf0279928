"""Vector-field models: the ModelSpec abstraction and built-in benchmark systems.

Built-ins
---------
* ``davis_skodje(gamma)`` -- two-dimensional slow-fast benchmark with a known
  attracting invariant curve y = x/(1+x) and a closed-form flow.
* ``michaelis_menten(gamma, kappa, beta)`` -- two-dimensional enzyme kinetics
  benchmark (no closed-form flow).
* ``linear_model(A)`` -- linear system with matrix-exponential oracles, used
  to validate the Lyapunov machinery against exact eigen-computations.

Reaction mechanisms compile to ModelSpec via :mod:`slowmanifold.mechanisms`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .errors import InvalidParameter
from .geometry import MetricField, euclidean_metric


@dataclass
class Oracles:
    """Optional analytic references attached to a model.

    flow : callable (p, t) -> state, the exact flow map.
    tangent_propagator : callable (p, t) -> (q, q) matrix dPhi^t(p).
    adjoint_propagator : callable (p, t) -> (q, q) matrix for the covector
        propagation (inverse transpose of the tangent propagator).
    invariant_graph : callable x -> y describing a known one-dimensional
        invariant manifold as a graph, with ``graph_domain`` its x-range.
    """
    flow: Optional[Callable] = None
    tangent_propagator: Optional[Callable] = None
    adjoint_propagator: Optional[Callable] = None
    invariant_graph: Optional[Callable] = None
    graph_domain: Optional[tuple] = None


@dataclass
class ModelSpec:
    """A smooth vector field on a coordinate domain.

    field_fn and jacobian_fn must be finite at every admissible state;
    jacobian_fn must match finite differences of field_fn. guard_fn, when
    present, is a scalar function positive on the admissible domain and
    crossing zero at its boundary (used for event detection during
    integration). guard_predicate is the boolean admissibility test.
    """
    name: str
    dim: int
    field_fn: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Callable[[np.ndarray], np.ndarray]
    metric: MetricField = None
    guard_fn: Optional[Callable[[np.ndarray], float]] = None
    oracles: Oracles = field(default_factory=Oracles)
    conservation: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.metric is None:
            self.metric = euclidean_metric(self.dim)

    def field(self, p):
        return np.asarray(self.field_fn(np.asarray(p, dtype=float)), dtype=float)

    def jacobian(self, p):
        return np.asarray(self.jacobian_fn(np.asarray(p, dtype=float)), dtype=float)

    def admissible(self, p):
        if self.guard_fn is None:
            return True
        return self.guard_fn(np.asarray(p, dtype=float)) > 0.0

    def speed(self, p):
        """Metric norm of the field vector at p."""
        from .geometry import Tangent, norm
        p = np.asarray(p, dtype=float)
        return norm(Tangent(p, self.field(p)), self.metric)


def finite_difference_jacobian(field_fn, p, rel_step=1e-6):
    """Central-difference Jacobian used to cross-check analytic Jacobians."""
    p = np.asarray(p, dtype=float)
    q = p.size
    J = np.empty((q, q))
    for j in range(q):
        h = rel_step * max(abs(p[j]), 1.0)
        e = np.zeros(q)
        e[j] = h
        J[:, j] = (np.asarray(field_fn(p + e)) - np.asarray(field_fn(p - e))) / (2 * h)
    return J


def davis_skodje(gamma: float) -> ModelSpec:
    """Two-dimensional slow-fast benchmark.

        xdot = -x
        ydot = -gamma*y + ((gamma-1)*x + gamma*x**2) / (1+x)**2

    valid for x > -1 and gamma > 1. The attracting invariant curve is the
    graph y = x/(1+x); the flow is known in closed form:

        x(t) = x0*exp(-t)
        y(t) = x(t)/(1+x(t)) + (y0 - x0/(1+x0))*exp(-gamma*t)
    """
    if not gamma > 1.0:
        raise InvalidParameter("davis_skodje requires gamma > 1")
    gamma = float(gamma)

    def fld(p):
        x, y = p
        return np.array([
            -x,
            -gamma * y + ((gamma - 1.0) * x + gamma * x * x) / (1.0 + x) ** 2,
        ])

    def jac(p):
        x, _ = p
        # d/dx of ((gamma-1)x + gamma x^2)/(1+x)^2
        u = (gamma - 1.0) * x + gamma * x * x
        du = (gamma - 1.0) + 2.0 * gamma * x
        denom = (1.0 + x) ** 2
        dh = du / denom - 2.0 * u / (1.0 + x) ** 3
        return np.array([[-1.0, 0.0], [dh, -gamma]])

    def exact_flow(p, t):
        x0, y0 = p
        x = x0 * np.exp(-t)
        return np.array([
            x,
            x / (1.0 + x) + (y0 - x0 / (1.0 + x0)) * np.exp(-gamma * t),
        ])

    oracles = Oracles(
        flow=exact_flow,
        invariant_graph=lambda x: x / (1.0 + x),
        graph_domain=(-0.9, 10.0),
    )
    return ModelSpec(
        name=f"davis_skodje(gamma={gamma})",
        dim=2,
        field_fn=fld,
        jacobian_fn=jac,
        guard_fn=lambda p: p[0] + 1.0,
        oracles=oracles,
    )


def michaelis_menten(gamma: float, kappa: float, beta: float) -> ModelSpec:
    """Two-dimensional enzyme kinetics benchmark.

        xdot = -x + x*y + (kappa - beta)*y
        ydot = gamma*(x + x*y + kappa*y)

    Note: with gamma = kappa = beta = c > 0 the Jacobian at the origin,
    [[-1, 0], [c, c**2]], has a nonnegative eigenvalue, so the origin is not
    attracting in the y direction. The system is implemented with exactly
    this sign pattern; random trajectories still bundle toward a
    one-dimensional structure near the origin, which is what the pipeline
    detects. No sign has been altered.
    """
    for v in (gamma, kappa, beta):
        if not np.isfinite(v):
            raise InvalidParameter("michaelis_menten parameters must be finite")
    gamma, kappa, beta = float(gamma), float(kappa), float(beta)

    def fld(p):
        x, y = p
        return np.array([
            -x + x * y + (kappa - beta) * y,
            gamma * (x + x * y + kappa * y),
        ])

    def jac(p):
        x, y = p
        return np.array([
            [-1.0 + y, x + kappa - beta],
            [gamma * (1.0 + y), gamma * (x + kappa)],
        ])

    return ModelSpec(
        name=f"michaelis_menten(gamma={gamma},kappa={kappa},beta={beta})",
        dim=2,
        field_fn=fld,
        jacobian_fn=jac,
    )


def linear_model(A) -> ModelSpec:
    """Linear system p' = A p with matrix-exponential oracles.

    The tangent propagator is expm(A t) and the adjoint (covector)
    propagator is expm(-A^T t), its inverse transpose.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidParameter("linear_model requires a square matrix")
    if not np.all(np.isfinite(A)):
        raise InvalidParameter("linear_model requires a finite matrix")
    q = A.shape[0]

    oracles = Oracles(
        flow=lambda p, t: expm(A * t) @ np.asarray(p, dtype=float),
        tangent_propagator=lambda p, t: expm(A * t),
        adjoint_propagator=lambda p, t: expm(-A.T * t),
    )
    return ModelSpec(
        name="linear",
        dim=q,
        field_fn=lambda p: A @ p,
        jacobian_fn=lambda p: A.copy(),
        oracles=oracles,
    )
