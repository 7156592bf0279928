"""Constrained optimization of horizon aggregates over a speed level set.

The constraint set is the level set of the vector-field speed,

    K_eps = { p : ||X_p||_g = eps },   eps > 0,

which excludes equilibria and compares points by attained velocity. The
objective F_T is a grid-sup and therefore only piecewise smooth, so the
inner search is derivative-free (Nelder-Mead) inside an augmented-Lagrangian
outer loop for the equality constraint, followed by a Newton projection back
onto the level set. A horizon sweep re-optimizes for increasing T with warm
starts, producing a net of minimizers whose clustering signals an attracting
trajectory.

For models with linear conservation laws (reaction mechanisms) the search is
restricted to the invariant affine subspace through a reference composition
by optimizing in subspace coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize

from .errors import (EmptyGrid, Infeasible, LevelSetNotFound,
                     ObjectiveFailure, ZeroField)
from .flow import sample_trajectory
from .objective import F_T, ObjectiveSpec


@dataclass
class LevelSetSpec:
    """Speed level set with an optional affine-subspace restriction.

    box : (lo, hi) arrays bounding the seed region in ambient coordinates.
    origin/basis : when set, the search space is origin + basis @ z and all
    optimization is done in the reduced coordinates z.
    """
    epsilon: float
    box: tuple
    origin: Optional[np.ndarray] = None
    basis: Optional[np.ndarray] = None   # (q, k), orthonormal columns

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        lo, hi = self.box
        self.box = (np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        if self.origin is not None:
            self.origin = np.asarray(self.origin, dtype=float)
            self.basis = np.asarray(self.basis, dtype=float)

    @property
    def reduced(self):
        return self.origin is not None

    def embed(self, z):
        if self.reduced:
            return self.origin + self.basis @ np.asarray(z, dtype=float)
        return np.asarray(z, dtype=float)

    def reduce(self, p):
        if self.reduced:
            return self.basis.T @ (np.asarray(p, dtype=float) - self.origin)
        return np.asarray(p, dtype=float)

    def residual(self, model, p):
        return model.speed(p) - self.epsilon


@dataclass
class MinimizerRecord:
    T: float
    p_star: np.ndarray
    F_value: float
    residual: float
    iterations: int
    starts_used: int
    status: str

    def to_dict(self):
        return {
            "T": float(self.T),
            "p_star": [float(v) for v in self.p_star],
            "F_value": float(self.F_value),
            "residual": float(self.residual),
            "iterations": int(self.iterations),
            "starts_used": int(self.starts_used),
            "status": self.status,
        }


@dataclass
class SweepResult:
    records: List[MinimizerRecord]
    distances: List[float]
    accumulation: bool
    accumulation_tol: float

    def to_dict(self):
        return {
            "records": [r.to_dict() for r in self.records],
            "distances": [float(d) for d in self.distances],
            "accumulation": bool(self.accumulation),
            "accumulation_tol": float(self.accumulation_tol),
        }


def find_equilibrium(model, x0, subspace=None, max_iter=60, tol=1e-12):
    """Damped Newton search for X(p) = 0 from x0.

    subspace, when given as (origin, basis), restricts the iteration to the
    affine subspace. Returns the equilibrium or None if Newton fails.
    """
    p = np.asarray(x0, dtype=float).copy()
    basis = None
    if subspace is not None:
        origin, basis = subspace
        p = origin + basis @ (basis.T @ (p - origin))
    scale = max(np.linalg.norm(p), 1.0)
    for _ in range(max_iter):
        f = model.field(p)
        if np.linalg.norm(f) < tol * scale:
            return p
        J = model.jacobian(p)
        try:
            if basis is not None:
                Jr = basis.T @ J @ basis
                step = basis @ np.linalg.solve(Jr, basis.T @ f)
            else:
                step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            return None
        # damping: halve until the residual does not grow
        lam = 1.0
        fn = np.linalg.norm(f)
        for _ in range(20):
            cand = p - lam * step
            if model.admissible(cand) and \
                    np.linalg.norm(model.field(cand)) < fn:
                p = cand
                break
            lam *= 0.5
        else:
            return None
    f = model.field(p)
    if np.linalg.norm(f) < 1e-9 * scale:
        return p
    return None


def _bisect_residual(resid, a, b, target):
    """Bisection on a bracketing interval until |resid| <= target."""
    fa, fb = resid(a), resid(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise ValueError("interval does not bracket the level set")
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = resid(m)
        if abs(fm) <= target:
            return m
        if fa * fm <= 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def sample_level_set(model, ls: LevelSetSpec, n, seed=0, max_tries=None):
    """Sample n points on the speed level set, deterministically per seed.

    Strategy: locate an equilibrium by Newton from the seed-region center
    and bisect the speed residual along random rays from it; when no
    equilibrium is found, bisect along random chords of the seed box.
    """
    rng = np.random.default_rng(seed)
    lo, hi = ls.box
    center = ls.embed(ls.reduce(0.5 * (lo + hi)))
    subspace = (ls.origin, ls.basis) if ls.reduced else None
    equilibrium = find_equilibrium(model, center, subspace=subspace)
    target = 1e-10 * ls.epsilon
    k = ls.basis.shape[1] if ls.reduced else model.dim
    span = np.linalg.norm(hi - lo)
    points = []
    tries = 0
    max_tries = max_tries or 200 * n
    while len(points) < n and tries < max_tries:
        tries += 1
        if equilibrium is not None:
            d = rng.standard_normal(k)
            d /= np.linalg.norm(d)
            z0 = ls.reduce(equilibrium)

            def resid(r, d=d, z0=z0):
                return ls.residual(model, ls.embed(z0 + r * d))
            # walk outward until the residual changes sign
            r_lo, r_hi = 0.0, None
            r = 1e-3 * span
            for _ in range(60):
                p_cand = ls.embed(z0 + r * d)
                if not model.admissible(p_cand):
                    break
                if resid(r) > 0:
                    r_hi = r
                    break
                r_lo = r
                r *= 1.7
            if r_hi is None:
                continue
            r_star = _bisect_residual(resid, r_lo, r_hi, target)
            p = ls.embed(z0 + r_star * d)
        else:
            za = ls.reduce(lo + rng.random(model.dim) * (hi - lo))
            zb = ls.reduce(lo + rng.random(model.dim) * (hi - lo))

            def resid(s, za=za, zb=zb):
                return ls.residual(model, ls.embed(za + s * (zb - za)))
            if resid(0.0) * resid(1.0) > 0:
                continue
            s_star = _bisect_residual(resid, 0.0, 1.0, target)
            p = ls.embed(za + s_star * (zb - za))
        if model.admissible(p) and abs(ls.residual(model, p)) <= target:
            points.append(p)
    if len(points) < n:
        raise LevelSetNotFound(
            f"found only {len(points)}/{n} level-set points after "
            f"{tries} probes")
    return points


def project_to_level_set(model, ls: LevelSetSpec, p, max_iter=50,
                         rel_tol=1e-9):
    """Newton projection of p onto the level set along the residual gradient.

    The gradient is taken in the (possibly reduced) search coordinates with
    a finite-difference directional derivative; convergence is quadratic
    near the set.
    """
    z = ls.reduce(p)
    h = 1e-7

    def resid(z):
        return ls.residual(model, ls.embed(z))

    for _ in range(max_iter):
        r = resid(z)
        if abs(r) <= rel_tol * ls.epsilon:
            return ls.embed(z)
        grad = np.empty_like(z)
        for j in range(z.size):
            e = np.zeros_like(z)
            e[j] = h * max(abs(z[j]), 1.0)
            grad[j] = (resid(z + e) - resid(z - e)) / (2 * e[j])
        gg = float(grad @ grad)
        if gg == 0.0:
            break
        z = z - (r / gg) * grad
    return ls.embed(z)


def optimize_on_levelset(model, spec: ObjectiveSpec, ls: LevelSetSpec,
                         starts, tol=None, stiff=False,
                         inner_maxiter=200, outer_rounds=8,
                         feas_tol=1e-8) -> MinimizerRecord:
    """Optimize F_T over the level set from multiple starts.

    Augmented-Lagrangian outer loop (penalty growth x10) around Nelder-Mead,
    then Newton projection onto the constraint and objective re-evaluation
    at the projected point. The best feasible start wins; ties within 1e-10
    in F break toward lexicographically smaller coordinates.
    """
    if not starts:
        raise Infeasible("no starts provided")
    sign = 1.0 if spec.orientation == "minimize" else -1.0

    def F(p):
        try:
            return F_T(model, p, spec, tol=tol, stiff=stiff)
        except (EmptyGrid, ZeroField):
            return np.inf * sign if sign > 0 else -np.inf * sign

    best = None
    n_feasible = 0
    n_objective_failures = 0
    total_iters = 0
    for start in starts:
        z = ls.reduce(np.asarray(start, dtype=float))
        lam, mu = 0.0, 100.0
        prev_viol = np.inf
        for _ in range(outer_rounds):
            def merit(z, lam=lam, mu=mu):
                p = ls.embed(z)
                if not model.admissible(p):
                    return 1e12
                r = ls.residual(model, p)
                val = sign * F(p)
                if not np.isfinite(val):
                    return 1e12
                return val + lam * r + 0.5 * mu * r * r
            res = minimize(merit, z, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12,
                                    "maxiter": inner_maxiter,
                                    "maxfev": 4 * inner_maxiter})
            z = res.x
            total_iters += int(res.nit)
            r = ls.residual(model, ls.embed(z))
            if abs(r) <= 0.1 * feas_tol * ls.epsilon:
                break
            lam += mu * r
            if abs(r) > 0.25 * prev_viol:
                mu *= 10.0
            prev_viol = abs(r)
        p_sol = project_to_level_set(model, ls, ls.embed(z),
                                     rel_tol=0.1 * feas_tol)
        r_sol = ls.residual(model, p_sol)
        if abs(r_sol) > feas_tol * ls.epsilon:
            continue
        f_sol = F(p_sol)
        if not np.isfinite(f_sol):
            n_objective_failures += 1
            continue
        n_feasible += 1
        cand = (p_sol, f_sol, r_sol)
        if best is None:
            best = cand
        else:
            diff = sign * (f_sol - best[1])
            if diff < -1e-10:
                best = cand
            elif abs(diff) <= 1e-10 and tuple(p_sol) < tuple(best[0]):
                best = cand
    if best is None:
        if n_objective_failures:
            raise ObjectiveFailure(
                "objective undefined (trajectory truncated at every grid "
                "point) at all feasible candidates")
        raise Infeasible("no start achieved the constraint tolerance")
    p_star, f_star, r_star = best
    return MinimizerRecord(
        T=spec.T, p_star=p_star, F_value=float(f_star),
        residual=float(r_star), iterations=total_iters,
        starts_used=n_feasible, status="converged",
    )


def horizon_sweep(model, spec_template: ObjectiveSpec, ls: LevelSetSpec,
                  T_list, starts, tol=None, stiff=False,
                  accumulation_tol=1e-4, **opt_kwargs) -> SweepResult:
    """Run the optimization for each horizon, warm-starting along the way.

    Grids share the base step T_list[0] / 2**level so they are nested across
    horizons. Consecutive minimizer distances are reported; the accumulation
    flag is a heuristic (monotone decrease over the last three steps and a
    final distance below tolerance), not a proof.
    """
    T_list = [float(T) for T in T_list]
    if any(b >= a for a, b in zip(T_list[1:], T_list)):
        raise ValueError("T_list must be strictly increasing")
    base_step = spec_template.base_step or \
        T_list[0] / 2 ** spec_template.level
    records = []
    current_starts = list(starts)
    for T in T_list:
        spec = replace(spec_template, T=T, base_step=base_step)
        rec = optimize_on_levelset(model, spec, ls, current_starts,
                                   tol=tol, stiff=stiff, **opt_kwargs)
        records.append(rec)
        current_starts = [rec.p_star]
    distances = [float(np.linalg.norm(b.p_star - a.p_star))
                 for a, b in zip(records, records[1:])]
    accumulation = False
    if len(distances) >= 3:
        tail = distances[-3:]
        accumulation = tail[0] > tail[1] > tail[2] and \
            tail[2] <= accumulation_tol
    return SweepResult(records=records, distances=distances,
                       accumulation=accumulation,
                       accumulation_tol=accumulation_tol)


@dataclass
class Trajectory:
    """Sampled solution curve through a point, both time directions."""
    times: np.ndarray
    states: np.ndarray
    t_min: float
    t_max: float
    backward_reason: Optional[str] = None
    forward_reason: Optional[str] = None


def emit_limit_trajectory(model, record: MinimizerRecord, span,
                          n_samples=201, tol=None, stiff=False) -> Trajectory:
    """Dense trajectory samples through the minimizer over [t_back, t_fwd].

    Truncation at domain failures is reported on the result, not raised.
    """
    t_back, t_fwd = float(span[0]), float(span[1])
    if t_back > 0 or t_fwd < 0:
        raise ValueError("span must contain 0")
    times = np.unique(np.concatenate([
        np.linspace(t_back, 0.0, max(2, n_samples // 2)) if t_back < 0
        else [0.0],
        np.linspace(0.0, t_fwd, max(2, n_samples // 2)) if t_fwd > 0
        else [0.0],
    ]))
    ts, states, domain = sample_trajectory(model, record.p_star, times,
                                           tol=tol, stiff=stiff)
    return Trajectory(times=ts, states=states,
                      t_min=domain.t_min, t_max=domain.t_max,
                      backward_reason=domain.backward_reason,
                      forward_reason=domain.forward_reason)


def default_epsilon(model, box, subspace=None, seed=0, quantile=0.1,
                    n_probe=200):
    """Pick a speed level: a quantile of field norms sampled in the box.

    Toy models use the field norm at the box centroid scaled by 0.1 when the
    quantile degenerates to zero.
    """
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    speeds = []
    for _ in range(n_probe):
        p = lo + rng.random(lo.size) * (hi - lo)
        if subspace is not None:
            origin, basis = subspace
            p = origin + basis @ (basis.T @ (p - origin))
        if model.admissible(p):
            speeds.append(model.speed(p))
    speeds = np.array(speeds)
    eps = float(np.quantile(speeds, quantile))
    if eps <= 0:
        eps = 0.1 * model.speed(0.5 * (lo + hi))
    return eps
