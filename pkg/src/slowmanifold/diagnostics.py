"""Certification of candidate invariant curves against normal attraction.

Given a candidate one-dimensional invariant curve, this module computes the
tightest attraction constants

    c(p)     = sup over s >= 0 and unit tangent v / transverse w of
               (growth of w / growth of v) * exp(s * nu)
    c_hat(p) = sup over trajectory times t of c(Phi^t(p)) * exp(-|t| * nu_C)

discretized on explicit grids, checks the defining inequality of normal
attraction and the log-Lipschitz bound on c along trajectories, and
evaluates finite-time forms of the necessary spectral-gap conditions.

Certificates certify the discretization, not the continuum: every report
carries its grids and horizon. When no transverse bundle is supplied, the
g-orthogonal complement of the tangent is used; that complement is generally
not invariant, so the certificate is a sufficient finite-time check for the
orthogonal splitting only (noted on every report).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import ZeroVector
from .flow import propagate_frames
from .geometry import Tangent, angle, flat, norm, orthonormal_complement
from .lyapunov import (adjoint_ftle, extremal_adjoint_ftle_perp,
                       extremal_ftle_subspace, ftle)

ORTHOGONAL_COMPLEMENT_NOTE = (
    "transverse bundle defaulted to the metric-orthogonal complement of the "
    "tangent; this complement is generally not invariant, so the certificate "
    "is a finite-time check for the orthogonal splitting only"
)


@dataclass
class CandidateCurve:
    """A sampled candidate invariant curve with tangent/transverse rules.

    samples : (n, q) states on the curve.
    tangent_rule : state -> tangent direction (nonzero on the curve). For a
        trajectory this is the vector field itself.
    transverse_rule : state -> (q, q-1) basis of the transverse complement,
        or None to use the metric-orthogonal complement of the tangent.
    """
    samples: np.ndarray
    tangent_rule: Callable[[np.ndarray], np.ndarray]
    transverse_rule: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))

    @classmethod
    def from_trajectory(cls, model, states, transverse_rule=None):
        """Curve whose tangent is the vector field (a solution curve)."""
        return cls(np.asarray(states, dtype=float), model.field,
                   transverse_rule)

    @classmethod
    def from_graph(cls, xs, graph, dgraph, transverse_rule=None):
        """Planar curve given as a graph y = graph(x) with slope dgraph."""
        xs = np.asarray(xs, dtype=float)
        samples = np.column_stack([xs, [graph(x) for x in xs]])
        tangent = lambda p: np.array([1.0, dgraph(p[0])])
        return cls(samples, tangent, transverse_rule)

    def tangent(self, p):
        v = np.asarray(self.tangent_rule(np.asarray(p, dtype=float)),
                       dtype=float)
        if not np.any(v):
            raise ZeroVector("curve tangent vanishes at a sample")
        return v

    def transverse(self, p, metric):
        p = np.asarray(p, dtype=float)
        if self.transverse_rule is not None:
            E = np.asarray(self.transverse_rule(p), dtype=float)
            if E.ndim == 1:
                E = E[:, None]
            joint = np.column_stack([self.tangent(p)[:, None], E])
            if np.linalg.matrix_rank(joint) < joint.shape[1]:
                raise ValueError("transverse bundle is not complementary to "
                                 "the tangent")
            return E
        return orthonormal_complement(Tangent(p, self.tangent(p)), metric)


def _growth_factors(model, frame, v, E_basis):
    """Tangent growth ratio and extremal transverse growth ratios at one
    frame, all measured in the model metric."""
    g = model.metric
    nv0 = norm(Tangent(frame.base, v), g)
    nv1 = norm(Tangent(frame.state, frame.M @ v), g)
    rho_v = nv1 / nv0
    if g.is_euclidean:
        Bw = E_basis
        Mw = frame.M
    else:
        L0 = g.cholesky(frame.base)
        L1 = g.cholesky(frame.state)
        Bw = L0.T @ E_basis
        Mw = L1.T @ frame.M @ np.linalg.inv(L0.T)
    Q, _ = np.linalg.qr(Bw)
    s = np.linalg.svd(Mw @ Q, compute_uv=False)
    return rho_v, float(s.max()), float(s.min())


def c_of_p(model, curve: CandidateCurve, p, nu, s_grid, tol=None,
           return_arg=False):
    """Discretized attraction constant c(p) on the nonnegative s-grid.

    c(p) >= 1 always (s = 0 contributes the ratio 1). A value that keeps
    growing as the grid extends indicates that nu exceeds the true decay
    gap, i.e. nu is infeasible for this curve.
    """
    p = np.asarray(p, dtype=float)
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    s_grid = np.unique(np.concatenate([[0.0], np.asarray(s_grid, dtype=float)]))
    if np.any(s_grid < 0):
        raise ValueError("s_grid must be nonnegative")
    v = curve.tangent(p)
    E = curve.transverse(p, model.metric)
    frames, _ = propagate_frames(model, p, s_grid, tol=tol)
    best, arg = 1.0, 0.0
    for fr in frames:
        if fr.t == 0.0:
            continue
        rho_v, sig_max, _ = _growth_factors(model, fr, v, E)
        val = (sig_max / rho_v) * np.exp(fr.t * nu)
        if val > best:
            best, arg = float(val), fr.t
    if return_arg:
        return best, arg
    return best


def c_hat_of_p(model, curve: CandidateCurve, p, nu, nu_C, t_grid, s_grid,
               tol=None):
    """Discretized c_hat(p): sup over trajectory times of the damped c.

    Returns (value, arg_t) with arg_t the grid time attaining the sup.
    """
    if nu_C < 0:
        raise ValueError("nu_C must be nonnegative")
    p = np.asarray(p, dtype=float)
    t_grid = np.unique(np.concatenate([[0.0], np.asarray(t_grid, dtype=float)]))
    ts, states, _ = _flow_samples(model, p, t_grid, tol)
    best, arg = -np.inf, 0.0
    for t, state in zip(ts, states):
        val = c_of_p(model, curve, state, nu, s_grid, tol=tol) \
            * np.exp(-abs(t) * nu_C)
        if val > best:
            best, arg = float(val), float(t)
    return best, arg


def _flow_samples(model, p, t_grid, tol):
    from .flow import sample_trajectory
    return sample_trajectory(model, p, t_grid, tol=tol)


@dataclass
class AttractionCertificate:
    """Result of checking a curve against the normal-attraction inequality."""
    nu: float
    nu_C: float
    horizon: float
    c_values: List[float]
    c_hat_values: List[float]
    worst_slack: float
    passed: bool
    estimation_s_grid: List[float]
    validation_s_grid: List[float]
    lip_t_grid: List[float]
    ordering_slack: float
    notes: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "nu": self.nu, "nu_C": self.nu_C, "horizon": self.horizon,
            "c_values": [float(c) for c in self.c_values],
            "c_hat_values": [float(c) for c in self.c_hat_values],
            "worst_slack": float(self.worst_slack),
            "passed": bool(self.passed),
            "estimation_s_grid": [float(s) for s in self.estimation_s_grid],
            "validation_s_grid": [float(s) for s in self.validation_s_grid],
            "lip_t_grid": [float(t) for t in self.lip_t_grid],
            "ordering_slack": float(self.ordering_slack),
            "notes": list(self.notes),
        }


def certify_normal_attraction(model, curve: CandidateCurve, nu, nu_C, horizon,
                      n_s=17, n_t=5, tol=None,
                      slack_tol=1e-7) -> AttractionCertificate:
    """Certify (or refute) normal attraction of a candidate curve.

    Per sample p the raw constant c is estimated on s in [0, horizon/2],
    then the certified constant C := c_hat (the nu_C-damped sup of c along
    the trajectory) is formed on a shared flow grid. The defining
    inequality with C is validated on the full s in [0, horizon] grid; a nu
    exceeding the true decay gap makes c grow past the estimation window
    and produces negative validation slack. The log-Lipschitz bound on C
    between flow times is checked on the same grid. worst_slack below
    -slack_tol refutes the pair (nu, nu_C) at this horizon and
    discretization; slack_tol absorbs integrator error when the
    inequality is exactly tight.
    """
    if not 0 <= nu_C < nu:
        raise ValueError("requires 0 <= nu_C < nu")
    g = model.metric
    est_grid = np.linspace(0.0, horizon / 2.0, n_s)
    val_grid = np.linspace(0.0, horizon, 2 * n_s - 1)
    half = np.linspace(0.0, horizon / 2.0, n_t)
    chat_t_grid = np.unique(np.concatenate([-half[::-1], half]))

    c_values, c_hat_values = [], []
    worst = np.inf
    ordering_slack = np.inf
    for p in curve.samples:
        v = curve.tangent(p)
        E = curve.transverse(p, g)
        c_p = c_of_p(model, curve, p, nu, est_grid, tol=tol)
        c_values.append(c_p)

        # one absolute flow grid supplies c along the trajectory; the damped
        # sup over this common grid defines C := c_hat at every flow time,
        # which is log-Lipschitz with rate nu_C by construction
        ts, states, _ = _flow_samples(model, p, chat_t_grid, tol)
        c_along = np.array([
            c_of_p(model, curve, state, nu, est_grid, tol=tol)
            for state in states])

        def c_hat_at(t):
            return float((c_along * np.exp(-np.abs(ts - t) * nu_C)).max())

        C_p = c_hat_at(0.0)
        c_hat_values.append(C_p)
        ordering_slack = min(ordering_slack,
                             float(c_p - 1.0), float(C_p - c_p))

        # defining inequality with C on the validation grid; c grown past
        # the estimation window (nu infeasible) shows up as negative slack
        frames, _ = propagate_frames(model, p, val_grid, tol=tol)
        for fr in frames:
            if fr.t == 0.0:
                continue
            rho_v, sig_max, _ = _growth_factors(model, fr, v, E)
            slack = np.log(C_p) - fr.t * nu + np.log(rho_v) - np.log(sig_max)
            worst = min(worst, float(slack))

        # log-Lipschitz bound on C between flow times (exact on the shared
        # grid up to floating point)
        for t1 in ts:
            for t2 in ts:
                if t2 <= t1:
                    continue
                gap = nu_C * abs(t1 - t2) \
                    - abs(np.log(c_hat_at(t1)) - np.log(c_hat_at(t2)))
                worst = min(worst, float(gap) + 1e-12)

    notes = []
    if curve.transverse_rule is None:
        notes.append(ORTHOGONAL_COMPLEMENT_NOTE)
    return AttractionCertificate(
        nu=float(nu), nu_C=float(nu_C), horizon=float(horizon),
        c_values=c_values, c_hat_values=c_hat_values,
        worst_slack=float(worst), passed=bool(worst >= -slack_tol),
        estimation_s_grid=list(est_grid), validation_s_grid=list(val_grid),
        lip_t_grid=list(chat_t_grid), ordering_slack=float(ordering_slack),
        notes=notes,
    )


def tangential_rate_diagnostics(model, curve: CandidateCurve, p, horizon, tol=None):
    """Finite-time margins of the necessary spectral-gap conditions.

    Evaluates, at the largest admissible |t| <= horizon:

    * pairing_margin: min over transverse basis vectors u of
      lambda^t(u) + adjoint lambda^t(u^flat) (nonnegative by duality);
    * nu_est: lambda^t(X_p) + min-perpendicular adjoint exponent, the
      finite-time estimate of the normal decay gap;
    * backward_gap: min over unit transverse u of backward lambda(u) minus
      backward lambda(X_p), the finite-time form of the backward-gap
      condition (bounded below by nu - nu_C for a truly normally attracting curve).
    """
    g = model.metric
    p = np.asarray(p, dtype=float)
    x_p = curve.tangent(p)
    E = curve.transverse(p, g)

    from .flow import trajectory_domain
    domain = trajectory_domain(model, p, horizon, tol=tol)
    t_fwd = min(horizon, domain.t_max)
    t_back = max(-horizon, domain.t_min)
    if t_fwd <= 0 or t_back >= 0:
        raise ValueError("trajectory domain too small for diagnostics")
    # stay strictly inside a truncated domain
    if domain.forward_reason is not None:
        t_fwd *= 0.9
    if domain.backward_reason is not None:
        t_back *= 0.9

    frames, _ = propagate_frames(model, p, [t_back, 0.0, t_fwd], tol=tol)
    by_t = {fr.t: fr for fr in frames}
    fr_fwd = by_t[t_fwd]
    fr_back = by_t[t_back]

    pairing_margin = np.inf
    for j in range(E.shape[1]):
        u = Tangent(p, E[:, j])
        lam = ftle(fr_fwd, u, g)
        lam_adj = adjoint_ftle(fr_fwd, flat(u, g), g)
        cosang = np.cos(angle(u, u, g))
        margin = lam + lam_adj - np.log(cosang) / abs(t_fwd)
        pairing_margin = min(pairing_margin, float(margin))

    lam_x = ftle(fr_fwd, Tangent(p, x_p), g)
    min_perp, _ = extremal_adjoint_ftle_perp(fr_fwd, Tangent(p, x_p), g,
                                             mode="min")
    nu_est = lam_x + min_perp

    lam_x_back = ftle(fr_back, Tangent(p, x_p), g)
    min_trans_back, _ = extremal_ftle_subspace(fr_back, E, g, mode="min")
    backward_gap = min_trans_back - lam_x_back

    return {
        "t_forward": float(t_fwd),
        "t_backward": float(t_back),
        "pairing_margin": float(pairing_margin),
        "nu_est": float(nu_est),
        "backward_gap": float(backward_gap),
    }
