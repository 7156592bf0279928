"""Numerical flow map and variational propagators along trajectories.

For a model p' = X(p) this module integrates, jointly and with shared step
control,

    state:            d/dt Phi^t(p) = X(Phi^t(p))
    tangent frames:   M' = DX(Phi^t(p)) M,        M(0) = I
    adjoint frames:   N' = -DX(Phi^t(p))^T N,     N(0) = I

M(t) propagates tangent vectors (the derivative of the flow map); N(t)
propagates covectors and, in the Euclidean metric, equals the inverse
transpose of M(t). Both are integrated as their own matrix ODEs; the
inverse-transpose identity is kept as a test, not a construction, because
inverting M amplifies error over long stiff horizons.

Backward times are reached by integrating the same ODEs with decreasing t.
Trajectories may be truncated by three guards: state blow-up, exit from the
model's admissible domain, and step-size collapse. Truncation is data (a
TrajectoryDomain), not necessarily an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import RK45, solve_ivp
from scipy.optimize import brentq

from .errors import BlowUp, DomainExit, DomainTruncated, StepCollapse

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
BLOWUP_BOUND = 1e12

#: Tolerances used for stiff mechanism models.
STIFF_RTOL = 1e-6
STIFF_ATOL = 1e-12


@dataclass(frozen=True)
class PropagatedFrame:
    """Flow state and variational frames at one time along a trajectory."""
    t: float
    state: np.ndarray
    M: np.ndarray                 # tangent propagator dPhi^t at the base point
    N_adj: Optional[np.ndarray]   # adjoint (covector) propagator
    base: np.ndarray


@dataclass
class TrajectoryDomain:
    """Probed extent of the trajectory through a base point.

    t_min/t_max give the reached backward/forward times. A reason of None
    means no failure occurred within the probed span; otherwise one of
    "blow_up", "domain_exit", "step_collapse".
    """
    t_min: float
    t_max: float
    backward_reason: Optional[str] = None
    forward_reason: Optional[str] = None

    def contains(self, t):
        return self.t_min <= t <= self.t_max


def _tolerances(tol, stiff):
    if tol is not None:
        return float(tol[0]), float(tol[1])
    if stiff:
        return STIFF_RTOL, STIFF_ATOL
    return DEFAULT_RTOL, DEFAULT_ATOL


def _events(model, state_slice):
    events = []

    def blowup(t, y):
        return BLOWUP_BOUND - np.abs(y[state_slice]).max()
    blowup.terminal = True
    events.append(("blow_up", blowup))

    if model.guard_fn is not None:
        def guard(t, y):
            return model.guard_fn(y[state_slice])
        guard.terminal = True
        events.append(("domain_exit", guard))
    return events


def _classify(sol, events):
    """Map a solve_ivp result to (reason, t_reached)."""
    if sol.status == -1:
        sol_t = np.asarray(sol.t, dtype=float)
        t_reached = sol_t[-1] if sol_t.size else 0.0
        return "step_collapse", float(t_reached)
    if sol.status == 1:
        for (name, _), t_ev in zip(events, sol.t_events):
            if t_ev.size:
                return name, float(t_ev[0])
    return None, None


def _solve(model, y0, t_end, tol, stiff, t_eval, rhs, state_slice):
    rtol, atol = _tolerances(tol, stiff)
    events = _events(model, state_slice)
    method = "Radau" if stiff else "RK45"
    sol = solve_ivp(
        rhs, (0.0, t_end), y0,
        method=method, rtol=rtol, atol=atol,
        t_eval=t_eval, events=[e for _, e in events],
        dense_output=False,
    )
    reason, t_reached = _classify(sol, events)
    return sol, reason, t_reached


def integrate(model, p, t, tol=None, stiff=False):
    """Approximate Phi^t(p); raises a typed error if truncated before t.

    Negative t integrates backward in time. t = 0 returns p unchanged.
    """
    p = np.asarray(p, dtype=float)
    if t == 0.0:
        return p.copy()
    q = model.dim
    rhs = lambda _t, y: model.field(y)
    sol, reason, t_reached = _solve(
        model, p, float(t), tol, stiff, np.array([float(t)]), rhs, slice(0, q))
    if reason is not None:
        exc = {"blow_up": BlowUp, "domain_exit": DomainExit,
               "step_collapse": StepCollapse}[reason]
        raise exc(f"trajectory truncated ({reason}) before t={t}",
                  t_reached=t_reached)
    return sol.y[:, -1].copy()


def _joint_rhs(model, q, with_adjoint):
    if with_adjoint:
        def rhs(_t, y):
            state = y[:q]
            M = y[q:q + q * q].reshape(q, q)
            N = y[q + q * q:].reshape(q, q)
            J = model.jacobian(state)
            return np.concatenate([
                model.field(state),
                (J @ M).ravel(),
                (-J.T @ N).ravel(),
            ])
    else:
        def rhs(_t, y):
            state = y[:q]
            M = y[q:].reshape(q, q)
            J = model.jacobian(state)
            return np.concatenate([model.field(state), (J @ M).ravel()])
    return rhs


def propagate_frames(model, p, time_grid, tol=None, stiff=False,
                     need_adjoint=True):
    """Propagate state, tangent frames, and adjoint frames to grid times.

    time_grid must be sorted and contain 0. Returns (frames, domain); frames
    beyond a truncation time are omitted and the reason recorded in the
    TrajectoryDomain. need_adjoint=False skips the adjoint matrix ODE
    (frames then carry N_adj=None), which saves roughly half the work when
    only tangent growth is needed.

    With the default integrator, the solver is driven grid time to grid
    time (steps land exactly on every grid time, and the accepted-step
    history never looks past the current grid time), so the frame at a grid
    time depends only on the grid up to that time, never on how far the
    grid extends beyond it. Extending a grid therefore reproduces the
    shared prefix bit for bit, which makes horizon aggregates over nested
    grids exactly monotone. The stiff integrator keeps a single solve per
    direction: forcing the implicit method to stop at every grid time
    discards its step-size and Jacobian reuse, which is an order of
    magnitude slower on mechanism models.
    """
    p = np.asarray(p, dtype=float)
    q = model.dim
    grid = np.asarray(time_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) < 0):
        raise ValueError("time_grid must be sorted and nonempty")
    if not np.any(grid == 0.0):
        raise ValueError("time_grid must contain 0")

    eye = np.eye(q)
    if need_adjoint:
        y0 = np.concatenate([p, eye.ravel(), eye.ravel()])
    else:
        y0 = np.concatenate([p, eye.ravel()])
    rhs = _joint_rhs(model, q, need_adjoint)

    frames = {0.0: PropagatedFrame(0.0, p.copy(), eye.copy(),
                                   eye.copy() if need_adjoint else None, p)}
    t_min, t_max = 0.0, 0.0
    back_reason = fwd_reason = None

    for sign in (+1, -1):
        if sign > 0:
            times = grid[grid > 0.0]
        else:
            times = grid[grid < 0.0][::-1]  # decreasing toward t_min
        if times.size == 0:
            continue
        if stiff:
            sol, reason, t_hit = _solve(
                model, y0, float(times[-1]), tol, stiff, times, rhs,
                slice(0, q))
            sol_t = np.asarray(sol.t, dtype=float)
            for k, t in enumerate(sol_t):
                yk = sol.y[:, k]
                N = (yk[q + q * q:].reshape(q, q).copy()
                     if need_adjoint else None)
                frames[float(t)] = PropagatedFrame(
                    float(t), yk[:q].copy(),
                    yk[q:q + q * q].reshape(q, q).copy(), N, p)
            reached = float(sol_t[-1]) if sol_t.size else 0.0
        else:
            rtol, atol = _tolerances(tol, stiff)
            solver = RK45(rhs, 0.0, y0, t_bound=float(times[0]),
                          rtol=rtol, atol=atol)
            guard = model.guard_fn
            reason = None
            reached = 0.0
            for t_next in times:
                solver.t_bound = float(t_next)
                solver.status = "running"
                while solver.status == "running":
                    solver.step()
                    state_now = solver.y[:q]
                    if solver.status == "failed":
                        finite = np.all(np.isfinite(state_now))
                        big = (not finite
                               or np.abs(state_now).max()
                               > 0.01 * BLOWUP_BOUND)
                        reason = "blow_up" if big else "step_collapse"
                        reached = float(solver.t)
                        break
                    if np.abs(state_now).max() > BLOWUP_BOUND:
                        reason = "blow_up"
                        reached = float(solver.t)
                        break
                    if guard is not None and guard(state_now) <= 0.0:
                        reached = float(solver.t)
                        try:
                            dense = solver.dense_output()
                            reached = float(brentq(
                                lambda s: float(guard(dense(s)[:q])),
                                solver.t_old, solver.t))
                        except ValueError:
                            pass
                        reason = "domain_exit"
                        break
                if reason is not None:
                    break
                y = solver.y
                N = (y[q + q * q:].reshape(q, q).copy()
                     if need_adjoint else None)
                frames[float(t_next)] = PropagatedFrame(
                    float(t_next), y[:q].copy(),
                    y[q:q + q * q].reshape(q, q).copy(), N, p)
                reached = float(t_next)
        if sign > 0:
            t_max = reached if reason is not None else float(times[-1])
            fwd_reason = reason
        else:
            t_min = reached if reason is not None else float(times[-1])
            back_reason = reason

    ordered = [frames[t] for t in sorted(frames)]
    domain = TrajectoryDomain(t_min=min(t_min, 0.0), t_max=max(t_max, 0.0),
                              backward_reason=back_reason,
                              forward_reason=fwd_reason)
    return ordered, domain


def trajectory_domain(model, p, horizon, tol=None, stiff=False):
    """Probe integration to +/- horizon, recording truncation as data."""
    p = np.asarray(p, dtype=float)
    q = model.dim
    rhs = lambda _t, y: model.field(y)
    domain = TrajectoryDomain(t_min=-float(horizon), t_max=float(horizon))
    for sign in (+1, -1):
        sol, reason, t_reached = _solve(
            model, p, sign * float(horizon), tol, stiff, None, rhs, slice(0, q))
        if reason is not None:
            if sign > 0:
                domain.t_max = t_reached if t_reached is not None else 0.0
                domain.forward_reason = reason
            else:
                domain.t_min = t_reached if t_reached is not None else 0.0
                domain.backward_reason = reason
    return domain


def sample_trajectory(model, p, times, tol=None, stiff=False):
    """States of the trajectory through p at the given sorted times.

    times must contain 0. Returns (reached_times, states, domain); samples
    beyond a truncation are dropped.
    """
    p = np.asarray(p, dtype=float)
    q = model.dim
    grid = np.asarray(times, dtype=float)
    if not np.any(grid == 0.0):
        raise ValueError("times must contain 0")
    rhs = lambda _t, y: model.field(y)
    samples = {0.0: p.copy()}
    t_min, t_max = 0.0, 0.0
    back_reason = fwd_reason = None
    for sign in (+1, -1):
        sel = grid[grid > 0.0] if sign > 0 else grid[grid < 0.0][::-1]
        if sel.size == 0:
            continue
        sol, reason, _ = _solve(
            model, p, float(sel[-1]), tol, stiff, sel, rhs, slice(0, q))
        sol_t = np.asarray(sol.t, dtype=float)
        for k, t in enumerate(sol_t):
            samples[float(t)] = sol.y[:, k].copy()
        reached = float(sol_t[-1]) if sol_t.size else 0.0
        if sign > 0:
            t_max, fwd_reason = (reached if reason else float(sel[-1])), reason
        else:
            t_min, back_reason = (reached if reason else float(sel[-1])), reason
    ts = np.array(sorted(samples))
    states = np.array([samples[t] for t in ts])
    domain = TrajectoryDomain(min(t_min, 0.0), max(t_max, 0.0),
                              back_reason, fwd_reason)
    return ts, states, domain


def frame_at(model, p, t, tol=None, stiff=False):
    """Single PropagatedFrame at time t (convenience wrapper)."""
    grid = sorted({0.0, float(t)})
    frames, domain = propagate_frames(model, p, grid, tol=tol, stiff=stiff)
    for fr in frames:
        if fr.t == float(t):
            return fr
    raise DomainTruncated(
        f"t={t} outside trajectory domain [{domain.t_min}, {domain.t_max}]")
