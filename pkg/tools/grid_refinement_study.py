"""Pre-build oracle for the pipeline convergence threshold.

Densely samples the speed level set of the Davis-Skodje model (gamma=2,
epsilon=0.1), brute-force evaluates the horizon aggregate F_T at T=5 on a
grid two dyadic levels finer than the pipeline uses, flows the brute-force
minimizer forward, and reports the sup-distance of that trajectory to the
analytic invariant graph y = x/(1+x). The acceptance threshold for the
pipeline's emitted trajectory is frozen from this number.

Run once; results are recorded in tests/test_acceptance.py.
"""

import numpy as np

from slowmanifold import (F_T, LevelSetSpec, ObjectiveSpec, davis_skodje,
                          sample_level_set, sample_trajectory)

model = davis_skodje(gamma=2.0)
eps = 0.1
box = np.array([[-0.8, -0.8], [2.0, 2.0]])   # (lo, hi)
level_spec = LevelSetSpec(epsilon=eps, box=box)

# Dense net on K_eps: many rays from the equilibrium.
pts = sample_level_set(model, level_spec, n=512, seed=7)
print(f"sampled {len(pts)} level-set points")

# Pipeline uses level=4 with base_step = T_list[0]/2**4 = 1/16; the oracle
# refines two levels to base_step = 1/64.
spec = ObjectiveSpec(variant="a", mode="backward", T=5.0, base_step=1.0 / 64)

best_val, best_p = np.inf, None
for p in pts:
    try:
        val = F_T(model, p, spec)
    except Exception as exc:
        print("  skip", p, type(exc).__name__)
        continue
    if val < best_val:
        best_val, best_p = val, p
print("brute-force minimizer:", best_p, "F =", best_val)

times = np.linspace(0.0, 8.0, 201)
ts, states, _ = sample_trajectory(model, best_p, times)
graph = states[:, 0] / (1.0 + states[:, 0])
sup_dist = float(np.abs(states[:, 1] - graph).max())
print("sup-distance of forward trajectory to y = x/(1+x):", sup_dist)
print("suggested acceptance threshold (3x margin):", 3.0 * sup_dist)
