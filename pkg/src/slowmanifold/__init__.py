"""Locate and certify one-dimensional normally attracting invariant
manifolds of smooth vector fields.

The toolkit optimizes finite-time (adjoint) Lyapunov-exponent objectives
over a level set of the vector-field speed, sweeps the time horizon, and
emits the limiting trajectory together with diagnostic certificates of
normal attraction.
"""

__version__ = "0.1.0"

from .diagnostics import (AttractionCertificate, CandidateCurve, c_hat_of_p,
                          c_of_p, certify_normal_attraction, tangential_rate_diagnostics)
from .errors import SlowManifoldError
from .flow import (PropagatedFrame, TrajectoryDomain, frame_at, integrate,
                   propagate_frames, sample_trajectory, trajectory_domain)
from .geometry import (Cotangent, MetricField, Tangent, angle, conorm,
                       euclidean_metric, flat, norm, pairing, sharp)
from .lyapunov import (adjoint_ftle, cocycle_residual,
                       extremal_adjoint_ftle_perp, extremal_ftle_subspace,
                       ftle)
from .mechanisms import (Mechanism, compile_mechanism, conserved_subspace,
                         forward_rate_table, load_mechanism,
                         mechanism_from_dict)
from .models import ModelSpec, davis_skodje, linear_model, michaelis_menten
from .objective import CertificateReport, F_T, ObjectiveSpec, certify, f_t
from .optimizer import (LevelSetSpec, MinimizerRecord, SweepResult,
                        Trajectory, default_epsilon, emit_limit_trajectory,
                        find_equilibrium, horizon_sweep,
                        optimize_on_levelset, project_to_level_set,
                        sample_level_set)
