"""Numerical laboratory for non-invertible Anosov maps on the 2-torus.

Core objects: integer linear models with certified hyperbolic splitting,
trigonometric perturbations and their smooth conjugates, periodic-orbit
databases with exact lattice-class bookkeeping, bounded conjugacies to
the linear model and between map pairs, stable densities and affine leaf
metrics, cohomological (Livschitz-type) equations, the special versus
u-accessible dichotomy, leafwise regularity diagnostics, and a
classification pipeline with a command-line front end.
"""

from .torus import LinearModel, eigen_split, validate_model, coset_reps
from .maps import (TrigMap, TrigDiffeo, ConjugatedMap, PerturbationTerm,
                   AnosovCertificate, verify_anosov, load_spec, save_spec,
                   spec_from_dict)
from .hyperbolic import (PastChain, LeafSegment, make_chain, canonical_chain,
                         random_chain, shift_chain, stable_direction,
                         unstable_direction, unstable_directions_ensemble,
                         stable_leaf_segment, unstable_segment,
                         periodic_exponents, log_stable_norm)
from .orbits import PeriodicOrbit, OrbitDatabase, class_count
from .conjugacy import (ConjugacyField, SpecialnessReport, conjugacy_to_linear,
                        specialness_defect, conjugacy_between,
                        induced_orbit_conjugacy, match_periodic,
                        match_periodic_points)
from .cocycle import (Cocycle, TransferFunction, log_stable_cocycle,
                      log_jacobian_cocycle, custom_cocycle, birkhoff_sum,
                      density_rho, affine_distance, periodic_obstruction,
                      solve_coboundary, reduce_to_forward, transfer_P,
                      leaf_companion)
from .accessibility import (UPath, DichotomyReport, u_direction_spread,
                            dichotomy_verdict, find_fan_point, find_u_path)
from .regularity import (RegularityReport, stable_derivative_estimate,
                         unstable_derivative_estimate)
from .classify import (ClassificationReport, classify_topological,
                       classify_smooth, verdict_from_discrepancies,
                       certify_escalating)
from . import errors

__version__ = "0.1.0"
