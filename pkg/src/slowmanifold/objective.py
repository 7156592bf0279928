"""Pointwise trajectory criteria and their horizon aggregates.

The pointwise criterion f_t(p) comes in three variants:

  (a) the finite-time Lyapunov exponent of the field vector, lambda^t(X_p);
  (b) variant (a) plus the infimum of the adjoint exponent over unit
      directions perpendicular to X_p (a finite-time spectral-gap measure);
  (c) a two-level criterion that compares, at each flowed point Phi^t(p),
      backward growth of the field vector and adjoint growth of pulled-back
      perpendicular covectors against the horizon gap estimate nu^T(p).

The horizon aggregate F_T(p) is the sup (or inf) of f_t over a signed dyadic
time grid intersected with the trajectory domain. Within one horizon sweep
all grids share a base step so that grids are nested across horizons, which
makes F_T pointwise monotone in T exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DomainTruncated, EmptyGrid, ZeroField
from .flow import propagate_frames
from .geometry import Tangent
from .lyapunov import extremal_adjoint_ftle_perp, ftle

VARIANTS = ("a", "b", "c")
MODES = ("forward", "backward", "two_sided")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Configuration of one horizon-aggregated criterion.

    base_step fixes the time-grid spacing for a whole sweep; None derives it
    as T / 2**level, which is appropriate only for a standalone evaluation.
    """
    variant: str
    mode: str
    T: float
    level: int = 4
    orientation: str = "minimize"
    aggregation: str = "sup"
    base_step: Optional[float] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.orientation not in ("minimize", "maximize"):
            raise ValueError("orientation must be 'minimize' or 'maximize'")
        if self.aggregation not in ("sup", "inf"):
            raise ValueError("aggregation must be 'sup' or 'inf'")

    @property
    def step(self):
        return self.base_step if self.base_step else self.T / 2 ** self.level

    def time_grid(self):
        """Signed dyadic grid (0 excluded); nested across T for fixed step."""
        delta = self.step
        n = int(np.floor(self.T / delta + 1e-9))
        positive = delta * np.arange(1, n + 1)
        if self.mode == "forward":
            return positive
        if self.mode == "backward":
            return -positive[::-1]
        return np.concatenate([-positive[::-1], positive])

    def refined(self, extra_levels):
        """Same window with a 2**extra_levels finer grid (for validation)."""
        return replace(self, level=self.level + extra_levels,
                       base_step=self.step / 2 ** extra_levels)

    def with_horizon(self, T):
        return replace(self, T=float(T))


def _require_field(model, p):
    x = model.field(p)
    if not np.any(x):
        raise ZeroField("criterion undefined where the vector field vanishes")
    return x


def _f_variant_ab(model, frame, x_p, variant):
    g = model.metric
    value = ftle(frame, Tangent(frame.base, x_p), g)
    if variant == "b":
        perp, _ = extremal_adjoint_ftle_perp(
            frame, Tangent(frame.base, x_p), g, mode="min")
        value += perp
    return value


def _nu_T(model, p, x_p, T, tol=None, stiff=False):
    """Horizon gap estimate: lambda^T(X_p) + min-perp adjoint exponent."""
    frames, domain = propagate_frames(model, p, [0.0, T], tol=tol, stiff=stiff)
    if frames[-1].t != T:
        raise DomainTruncated(
            f"horizon t={T} outside trajectory domain "
            f"[{domain.t_min}, {domain.t_max}]")
    return _f_variant_ab(model, frames[-1], x_p, "b")


def _f_variant_c(model, frame, x_p, spec, tol=None, stiff=False, nu_T=None):
    """Variant (c): inner sup over tau in (0, T - t) at the flowed point."""
    g = model.metric
    t = frame.t
    if t <= 0 or t >= spec.T:
        raise ValueError("variant (c) is defined for 0 < t < T")
    if nu_T is None:
        nu_T = _nu_T(model, frame.base, x_p, spec.T, tol=tol, stiff=stiff)

    q = frame.state
    delta = spec.step
    n = int(np.floor((spec.T - t) / delta + 1e-9))
    if n == 0:
        return nu_T
    taus = delta * np.arange(1, n + 1)
    grid = np.concatenate([-taus[::-1], [0.0], taus])
    inner_frames, _ = propagate_frames(model, q, grid, tol=tol, stiff=stiff)
    by_t = {fr.t: fr for fr in inner_frames}

    # Covector subspace at q: perpendicular covectors at the base pulled to
    # the flowed point by the adjoint propagator.
    from .geometry import orthonormal_complement
    B = orthonormal_complement(Tangent(frame.base, x_p), g)
    if g.is_euclidean:
        C = B
    else:
        C = g.matrix(frame.base) @ B
    A = frame.N_adj @ C                       # covectors at q, (q x q-1)
    if g.is_euclidean:
        A_white = A
    else:
        A_white = np.linalg.solve(g.cholesky(q), A)
    Q_sub, _ = np.linalg.qr(A_white)

    x_q = model.field(q)
    best = -np.inf
    for tau in taus:
        fr_back = by_t.get(float(-tau))
        fr_fwd = by_t.get(float(tau))
        if fr_back is None or fr_fwd is None:
            continue
        lam_back = ftle(fr_back, Tangent(q, x_q), g)
        # inf over the pulled-back covector subspace of the adjoint exponent
        if g.is_euclidean:
            W = fr_fwd.N_adj
        else:
            L_q = g.cholesky(q)
            W = np.linalg.solve(g.cholesky(fr_fwd.state), fr_fwd.N_adj @ L_q)
        sigma_min = np.linalg.svd(W @ Q_sub, compute_uv=False).min()
        inf_adj = float(np.log(sigma_min))    # tau * adjoint exponent
        bracket = tau * nu_T - tau * lam_back - inf_adj
        best = max(best, bracket)
    if not np.isfinite(best):
        return nu_T
    return best / abs(t) + nu_T


def f_t(model, p, t, spec: ObjectiveSpec, tol=None, stiff=False):
    """Evaluate the pointwise criterion at a single signed time."""
    p = np.asarray(p, dtype=float)
    if t == 0.0:
        raise ValueError("criterion undefined at t = 0")
    x_p = _require_field(model, p)
    frames, domain = propagate_frames(model, p, sorted({0.0, float(t)}),
                                      tol=tol, stiff=stiff,
                                      need_adjoint=spec.variant != "a")
    frame = next((fr for fr in frames if fr.t == float(t)), None)
    if frame is None:
        raise DomainTruncated(
            f"t={t} outside trajectory domain [{domain.t_min}, {domain.t_max}]")
    if spec.variant in ("a", "b"):
        return _f_variant_ab(model, frame, x_p, spec.variant)
    return _f_variant_c(model, frame, x_p, spec, tol=tol, stiff=stiff)


def F_T(model, p, spec: ObjectiveSpec, tol=None, stiff=False,
        return_details=False):
    """Horizon aggregate of f_t over the signed dyadic grid.

    Grid points lost to trajectory truncation are skipped and reported in
    the details; if every grid point is lost, EmptyGrid is raised.
    """
    p = np.asarray(p, dtype=float)
    x_p = _require_field(model, p)
    grid = spec.time_grid()
    full_grid = np.unique(np.concatenate([grid, [0.0]]))
    frames, domain = propagate_frames(model, p, full_grid, tol=tol,
                                      stiff=stiff,
                                      need_adjoint=spec.variant != "a")
    by_t = {fr.t: fr for fr in frames}

    nu_T = None
    if spec.variant == "c":
        nu_T = _nu_T(model, p, x_p, spec.T, tol=tol, stiff=stiff)

    values = {}
    skipped = []
    for t in grid:
        frame = by_t.get(float(t))
        if frame is None:
            skipped.append(float(t))
            continue
        if spec.variant in ("a", "b"):
            values[float(t)] = _f_variant_ab(model, frame, x_p, spec.variant)
        else:
            if not 0.0 < t < spec.T:
                # variant (c) is a forward-window criterion; times at or
                # beyond the horizon contribute the horizon estimate itself
                values[float(t)] = nu_T
            else:
                values[float(t)] = _f_variant_c(model, frame, x_p, spec,
                                                tol=tol, stiff=stiff,
                                                nu_T=nu_T)
    if not values:
        raise EmptyGrid("every time-grid point lies outside the trajectory "
                        "domain")
    agg = max(values.values()) if spec.aggregation == "sup" \
        else min(values.values())
    if return_details:
        return agg, {"values": values, "skipped": skipped, "domain": domain}
    return agg


@dataclass
class CertificateReport:
    """Re-check of the exponential bound implied by an F value.

    For the sup aggregation the bound is f_t(p*) <= F for all window times;
    the slack at each validation time is |t| * (F - f_t), the log-scale
    margin of the corresponding norm inequality (for variant (a):
    ||dPhi^t(X_p*)|| <= e^{|t| F} ||X_p*||). Negative slack beyond the
    flag tolerance marks a violation on the finer grid.
    """
    times: np.ndarray
    slacks: np.ndarray
    worst_slack: float
    flagged: bool
    F_value: float
    validation_level: int
    flag_tol: float = 1e-6

    def to_dict(self):
        return {
            "times": [float(t) for t in self.times],
            "slacks": [float(s) for s in self.slacks],
            "worst_slack": float(self.worst_slack),
            "flagged": bool(self.flagged),
            "F_value": float(self.F_value),
            "validation_level": int(self.validation_level),
            "flag_tol": float(self.flag_tol),
        }


def certify(model, p_star, spec: ObjectiveSpec, F_value=None, refine=2,
            tol=None, stiff=False) -> CertificateReport:
    """Validate the F-implied inequality on a finer time grid.

    The validation grid refines the optimization grid by ``refine`` dyadic
    levels; a coarse-grid sup can be exceeded on the finer grid, so small
    negative slacks bounded by the grid gap are reported, not asserted.
    """
    p_star = np.asarray(p_star, dtype=float)
    if F_value is None:
        F_value = F_T(model, p_star, spec, tol=tol, stiff=stiff)
    fine = spec.refined(refine)
    _, details = F_T(model, p_star, fine, tol=tol, stiff=stiff,
                     return_details=True)
    times = np.array(sorted(details["values"]))
    f_vals = np.array([details["values"][t] for t in times])
    if spec.aggregation == "sup":
        slacks = np.abs(times) * (F_value - f_vals)
    else:
        slacks = np.abs(times) * (f_vals - F_value)
    worst = float(slacks.min()) if slacks.size else float("nan")
    return CertificateReport(
        times=times, slacks=slacks, worst_slack=worst,
        flagged=bool(worst < -1e-6), F_value=float(F_value),
        validation_level=fine.level,
    )
