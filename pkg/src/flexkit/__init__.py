"""Flexibility analysis of linear systems under parameter uncertainty."""
from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .model import (AffineConstraint, ConstraintFilter, LinearSystem, apply_filter,
                    as_states, eliminate_states, load_system, normalize_rows,
                    system_from_dict, system_to_dict, validate)
from .sets import (CVaRNorm, Ellipsoid, Halfspaces, Hyperbox, Intersection, PNorm,
                   boundary_sample, compile_set, level, membership, nonnegative,
                   set_from_dict, set_to_dict)
from .special import confidence_level, gammainc_lower
from .feasibility import (GaussianSpec, SFEstimate, load_dist, psi, psi_batch,
                          stochastic_flexibility)
from .centers import (CenterResult, analytic_center, arithmetic_center, compute_center,
                      feasible_center)
from .solvers import BnBConfig
from .flex import (FlexSolution, RankLevel, Ranking, check_certificate, compare_designs,
                   flexibility_index, rank_constraints, verify_solution)
from .network import (NetworkModel, build_system, component_rank_map, emit_dot,
                      load_network, network_from_dict, network_to_dict)
