"""Slow-manifold analysis of a hydrogen combustion mechanism.

Loads the bundled six-reaction isothermal hydrogen mechanism, compiles it
into a mass-action vector field, verifies elemental conservation along a
stiff trajectory, and runs a short horizon sweep of the detection pipeline
restricted to the affine subspace fixed by the atomic conservation laws.

Run:  python3 demos/reaction_mechanism.py   (takes about a minute)
"""

from pathlib import Path

import numpy as np

from slowmanifold import cli
from slowmanifold.mechanisms import (compile_mechanism, conserved_subspace,
                                     forward_rate_table, load_mechanism)
from slowmanifold.flow import sample_trajectory
from slowmanifold.objective import ObjectiveSpec
from slowmanifold.optimizer import (LevelSetSpec, default_epsilon,
                                    horizon_sweep, sample_level_set)

MECH_PATH = Path(cli.__file__).parent / "data" / "hydrogen_mechanism.json"


def main():
    mech = load_mechanism(MECH_PATH).validate()
    print(f"mechanism: {len(mech.species)} species, "
          f"{len(mech.reactions)} reactions, T = {mech.temperature:g} K")
    for label, kf, _ in forward_rate_table(mech):
        print(f"  {label:<24} k_f = {kf:.4e}")

    model = compile_mechanism(mech)
    L = conserved_subspace(mech)
    print(f"conservation laws (rank {L.shape[0]}): rows of\n{L}")

    c0 = np.array([2e-6, 8e-7, 2e-7, 2e-7, 6e-7])
    ts, states, _ = sample_trajectory(
        model, c0, np.linspace(0.0, 1e-13, 21), stiff=True)
    drift = np.abs(L @ states.T - (L @ c0)[:, None]).max()
    print(f"max conservation drift along stiff trajectory: {drift:.2e}")

    # restrict the level set to the affine subspace c0 + ker(L)
    _, _, Vt = np.linalg.svd(L)
    basis = Vt[L.shape[0]:].T
    eps = default_epsilon(model, (c0 * 0.5, c0 * 1.5),
                          subspace=(c0, basis), seed=0)
    ls = LevelSetSpec(epsilon=eps, box=(c0 * 0.5, c0 * 1.5),
                      origin=c0, basis=basis)
    spec = ObjectiveSpec(variant="a", mode="backward", T=1e-14, level=3)
    starts = sample_level_set(model, ls, 3, seed=0)
    sweep = horizon_sweep(model, spec, ls, [1e-14, 3e-14, 1e-13],
                          starts, stiff=True, inner_maxiter=120)
    print(f"\nsweep at speed level {eps:.3e}:")
    for rec in sweep.records:
        print(f"  T={rec.T:.0e}  F={rec.F_value:.6e}  "
              f"residual={rec.residual:+.2e}  status={rec.status}")


if __name__ == "__main__":
    main()
