"""End-to-end acceptance suite.

One test per acceptance criterion, in order:

 1. closed-form oracle agreement of the exponent machinery on linear systems
 2. integrator accuracy against the slow-fast benchmark's closed-form flow
 3. cocycle identity and inverse-transpose propagator identity
 4. certification and refutation of the known invariant curve
 5. pipeline convergence to the known invariant curve (sup-distance
    threshold frozen by the pre-build grid-refinement study in
    tools/grid_refinement_study.py: brute-force minimum over a dense
    level-set net at two extra grid levels reached 9.6e-4)
 6. pipeline accumulation behavior on the enzyme-kinetics benchmark
 7. hydrogen mechanism: rates, conservation, stiff sweep completion
 8. exact pointwise monotonicity of the horizon aggregate on nested grids
 9. optimality of accepted minimizers against random feasible probes
10. bit-identical outputs under a fixed seed and config
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import brentq

from slowmanifold import cli
from slowmanifold.diagnostics import CandidateCurve, certify_normal_attraction
from slowmanifold.errors import EmptyGrid
from slowmanifold.flow import frame_at, propagate_frames, sample_trajectory
from slowmanifold.geometry import (Cotangent, Tangent, euclidean_metric,
                                   orthonormal_complement)
from slowmanifold.lyapunov import (adjoint_ftle, cocycle_residual,
                                   extremal_adjoint_ftle_perp, ftle)
from slowmanifold.mechanisms import (GAS_CONSTANT_KJ, compile_mechanism,
                                     conserved_subspace, load_mechanism)
from slowmanifold.models import davis_skodje, linear_model, michaelis_menten
from slowmanifold.objective import F_T, ObjectiveSpec
from slowmanifold.optimizer import (LevelSetSpec, default_epsilon,
                                    emit_limit_trajectory, horizon_sweep,
                                    sample_level_set)

DATA = Path(cli.__file__).parent / "data"
BOX2 = (np.array([-0.8, -0.8]), np.array([2.0, 2.0]))

# Frozen by tools/grid_refinement_study.py (dense 512-point level-set net,
# brute-force aggregate at grid level 6): best net point's forward
# trajectory reached sup-distance 9.6e-4; threshold is that with 3x margin.
TRAJECTORY_SUP_DISTANCE_THRESHOLD = 2.9e-3


def slow_curve_levelset_points(model, eps):
    """The two intersections of y = x/(1+x) with the speed level set."""
    graph = model.oracles.invariant_graph
    resid = lambda x: model.speed([x, graph(x)]) - eps
    xs = [brentq(resid, 1e-6, 1.0), brentq(resid, -0.5, -1e-6)]
    return [np.array([x, graph(x)]) for x in xs]


@pytest.fixture(scope="module")
def ds_pipeline():
    model = davis_skodje(2.0)
    ls = LevelSetSpec(epsilon=0.1, box=BOX2)
    spec = ObjectiveSpec(variant="a", mode="backward", T=1.0, level=4)
    starts = sample_level_set(model, ls, 4, seed=0)
    t0 = time.monotonic()
    sweep = horizon_sweep(model, spec, ls, [1.0, 2.0, 3.0, 4.0, 5.0],
                          starts, inner_maxiter=150)
    elapsed = time.monotonic() - t0
    return {"model": model, "ls": ls, "spec": spec, "sweep": sweep,
            "elapsed": elapsed}


@pytest.fixture(scope="module")
def mm_pipeline():
    model = michaelis_menten(1.0, 1.0, 1.0)
    ls = LevelSetSpec(epsilon=0.1, box=BOX2)
    spec = ObjectiveSpec(variant="a", mode="backward", T=1.0, level=4)
    starts = sample_level_set(model, ls, 4, seed=0)
    sweep = horizon_sweep(model, spec, ls, [1.0, 2.0, 3.0, 4.0, 5.0],
                          starts, inner_maxiter=150)
    return {"model": model, "ls": ls, "sweep": sweep}


@pytest.fixture(scope="module")
def hydrogen_setup():
    mech = load_mechanism(DATA / "hydrogen_mechanism.json")
    model = compile_mechanism(mech)
    c0 = np.array([2.0e-6, 8.0e-7, 2.0e-7, 2.0e-7, 6.0e-7])
    L = conserved_subspace(mech)
    _, s, Vt = np.linalg.svd(L)
    rank = int((s > 1e-12 * s.max()).sum())
    basis = Vt[rank:].T
    return {"mech": mech, "model": model, "c0": c0, "L": L, "basis": basis}


def test_criterion_01_linear_oracle_suite():
    t_start = time.monotonic()
    rng = np.random.default_rng(0)
    matrices = [np.diag([-1.0, -3.0])]
    for _ in range(3):
        B = rng.standard_normal((2, 2))
        matrices.append(-(B @ B.T + 2.0 * np.eye(2)))
    g = euclidean_metric(2)
    times = [0.5, 1.0, 2.0, 5.0]
    for A in matrices:
        vals, vecs = np.linalg.eigh((A + A.T) / 2.0)
        expA = lambda t: vecs @ np.diag(np.exp(vals * t)) @ vecs.T
        p = rng.uniform(-1.0, 1.0, size=2)
        frames, _ = propagate_frames(linear_model(A), p, [0.0] + times,
                                     tol=(1e-10, 1e-12))
        by_t = {fr.t: fr for fr in frames}
        for t in times:
            fr = by_t[t]
            M_o = expA(t)
            N_o = expA(-t)  # inverse transpose for symmetric A
            v = rng.standard_normal(2)
            w = rng.standard_normal(2)
            lam_o = math.log(np.linalg.norm(M_o @ v)
                             / np.linalg.norm(v)) / t
            lam = ftle(fr, Tangent(p, v), g)
            assert abs(lam - lam_o) <= 1e-6
            adj_o = math.log(np.linalg.norm(N_o @ w)
                             / np.linalg.norm(w)) / t
            adj = adjoint_ftle(fr, Cotangent(p, w), g)
            assert abs(adj - adj_o) <= 1e-6
            # extremal perpendicular adjoint exponent vs analytic SVD
            x = Tangent(p, rng.standard_normal(2))
            B_perp = orthonormal_complement(x, g)
            sv = np.linalg.svd(N_o @ B_perp, compute_uv=False)
            for mode, sigma in (("min", sv.min()), ("max", sv.max())):
                val, _ = extremal_adjoint_ftle_perp(fr, x, g, mode=mode)
                assert abs(val - math.log(sigma) / t) <= 1e-6
            # duality pairing preservation
            before = w @ v
            after = (fr.N_adj @ w) @ (fr.M @ v)
            assert abs(after - before) <= 1e-8 * max(abs(before), 1.0)
    assert time.monotonic() - t_start < 5.0


def test_criterion_02_davis_skodje_integrator_oracle():
    rng = np.random.default_rng(1)
    grid = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    for gamma in (2.0, 10.0):
        model = davis_skodje(gamma)
        worst_default = 0.0
        worst_tight = 0.0
        for _ in range(50):
            p = np.array([rng.uniform(-0.5, 2.0), rng.uniform(-1.0, 2.0)])
            exact = np.array([model.oracles.flow(p, t) for t in grid])
            _, states, _ = sample_trajectory(model, p, grid)
            worst_default = max(worst_default,
                                np.abs(states - exact).max())
            _, states_t, _ = sample_trajectory(model, p, grid,
                                               tol=(5e-9, 5e-11))
            worst_tight = max(worst_tight, np.abs(states_t - exact).max())
        assert worst_default <= 1e-7
        assert worst_tight <= worst_default


def test_criterion_03_cocycle_and_propagator_identities():
    rng = np.random.default_rng(2)
    cases = [
        (davis_skodje(2.0),
         lambda: np.array([rng.uniform(0.0, 1.5), rng.uniform(-0.5, 1.5)])),
        (michaelis_menten(1.0, 1.0, 1.0),
         lambda: rng.uniform(-0.4, 0.4, size=2)),
    ]
    for model, draw in cases:
        for _ in range(20):
            p = draw()
            s, t = rng.uniform(0.3, 1.2, size=2)
            v = rng.standard_normal(2)
            assert cocycle_residual(model, p, s, t, v) <= 1e-5
            fr = frame_at(model, p, t)
            assert np.abs(fr.N_adj @ fr.M.T - np.eye(2)).max() <= 1e-6


def test_criterion_04_definition_certification():
    model = davis_skodje(2.0)
    graph = model.oracles.invariant_graph
    xs = np.linspace(-0.3, 1.5, 7)
    curve = CandidateCurve.from_graph(
        xs, graph, lambda x: 1.0 / (1.0 + x) ** 2,
        transverse_rule=lambda p: np.array([[0.0], [1.0]]))
    cert = certify_normal_attraction(model, curve, 0.9, 0.1, 5.0)
    assert cert.passed and cert.worst_slack >= 0.0
    assert cert.ordering_slack >= -1e-9
    refuted = certify_normal_attraction(model, curve, 1.5, 0.1, 5.0)
    assert not refuted.passed and refuted.worst_slack < 0.0


def test_criterion_05_pipeline_convergence(ds_pipeline):
    model, ls, sweep = (ds_pipeline["model"], ds_pipeline["ls"],
                        ds_pipeline["sweep"])
    refs = slow_curve_levelset_points(model, ls.epsilon)
    dists = [min(np.linalg.norm(rec.p_star - r) for r in refs)
             for rec in sweep.records]
    assert all(a > b for a, b in zip(dists, dists[1:])), dists
    final = sweep.records[-1]
    traj = emit_limit_trajectory(model, final, [0.0, 8.0])
    graph = model.oracles.invariant_graph
    sup_dist = max(abs(y - graph(x)) for x, y in traj.states)
    assert sup_dist <= TRAJECTORY_SUP_DISTANCE_THRESHOLD
    assert ds_pipeline["elapsed"] < 120.0


def test_criterion_06_michaelis_menten_accumulation(mm_pipeline):
    sweep = mm_pipeline["sweep"]
    assert sweep.accumulation
    tail = sweep.distances[-3:]
    assert tail[0] > tail[1] > tail[2]


def test_criterion_07_hydrogen_mechanism(hydrogen_setup):
    mech, model = hydrogen_setup["mech"], hydrogen_setup["model"]
    c0, L, basis = (hydrogen_setup["c0"], hydrogen_setup["L"],
                    hydrogen_setup["basis"])
    mech.validate()
    # rate constants vs independent hand evaluation
    for r in mech.reactions:
        expect = r.forward.A * math.pow(3000.0, r.forward.b) \
            * math.exp(-r.forward.Ea / (GAS_CONSTANT_KJ * 3000.0))
        got = r.forward.rate_constant(3000.0)
        assert abs(got - expect) <= 1e-12 * abs(expect)
    # atomic conservation along a stiff trajectory
    grid = np.linspace(0.0, 1e-13, 11)
    _, states, _ = sample_trajectory(model, c0, grid, stiff=True)
    ref = L @ c0
    for state in states:
        assert np.abs(L @ state - ref).max() <= 1e-9 * np.abs(ref).max()
    # stiff sweep completes with a monotone objective
    eps = default_epsilon(model, (np.zeros(5), 1.5 * c0),
                          subspace=(c0, basis), seed=0)
    ls = LevelSetSpec(epsilon=eps, box=(np.zeros(5), 1.5 * c0),
                      origin=c0, basis=basis)
    spec = ObjectiveSpec(variant="a", mode="backward", T=1e-14, level=3)
    starts = sample_level_set(model, ls, 3, seed=0)
    sweep = horizon_sweep(model, spec, ls, [1e-14, 3e-14, 1e-13], starts,
                          stiff=True, inner_maxiter=120)
    assert len(sweep.records) == 3
    F_vals = [rec.F_value for rec in sweep.records]
    assert F_vals[0] <= F_vals[1] <= F_vals[2]
    for rec in sweep.records:
        assert abs(rec.residual) <= 1e-8 * eps


def test_criterion_08_monotone_family():
    rng = np.random.default_rng(3)
    models = [
        (linear_model(np.array([[-1.0, 0.4], [0.1, -2.0]])),
         lambda: rng.uniform(-1.0, 1.0, size=2)),
        (davis_skodje(2.0),
         lambda: np.array([rng.uniform(0.0, 1.5), rng.uniform(-0.5, 1.5)])),
        (michaelis_menten(1.0, 1.0, 1.0),
         lambda: rng.uniform(-0.4, 0.4, size=2)),
    ]
    s1 = ObjectiveSpec(variant="a", mode="backward", T=1.0, base_step=0.25)
    s2 = ObjectiveSpec(variant="a", mode="backward", T=2.0, base_step=0.25)
    checked = 0
    while checked < 200:
        model, draw = models[checked % len(models)]
        p = draw()
        if np.linalg.norm(model.field(p)) < 1e-12:
            continue
        try:
            F1 = F_T(model, p, s1)
            F2 = F_T(model, p, s2)
        except EmptyGrid:
            continue
        assert F1 <= F2
        checked += 1


def test_criterion_09_optimality_probes(ds_pipeline):
    model, ls, sweep = (ds_pipeline["model"], ds_pipeline["ls"],
                        ds_pipeline["sweep"])
    base_step = 1.0 / 16.0
    probes = sample_level_set(model, ls, 50, seed=99)
    for rec in sweep.records:
        spec = ObjectiveSpec(variant="a", mode="backward", T=rec.T,
                             base_step=base_step)
        for p in probes:
            assert F_T(model, p, spec) >= rec.F_value - 1e-8


def test_criterion_10_determinism(tmp_path):
    cfg = {
        "model": {"name": "davis_skodje", "gamma": 2.0},
        "objective": {"variant": "a", "mode": "backward",
                      "orientation": "minimize", "level": 3},
        "T_list": [0.5, 1.0],
        "epsilon": 0.1,
        "box": [[-0.8, -0.8], [2.0, 2.0]],
        "starts": 2,
        "seed": 7,
        "inner_maxiter": 60,
        "emit_span": [0.0, 2.0],
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    outs = []
    for name in ("out1", "out2"):
        out = tmp_path / name
        assert cli.main(["run", "--config", str(cfg_path),
                         "--out", str(out)]) == cli.EXIT_OK
        outs.append(out)
    files1 = sorted(p.name for p in outs[0].iterdir())
    files2 = sorted(p.name for p in outs[1].iterdir())
    assert files1 == files2 and files1
    for name in files1:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
