"""Discrete connection Laplacians on lattice vector bundles and their spectral splitting."""
from .bundle import (DiscreteConnection, SkewField, constant_connection_cycle, gauge_transform,
                     holonomy, hs_inner, perturb, random_connection, random_skew_field,
                     rank_one, trivial_connection, wedge)
from .errors import BochnerError
from .gbundle import equivariant_spectrum, g_simplicity_report, xi_correspondence_check
from .lattice import DiscreteSection, LatticeBase, build_cycle, build_torus
from .perturbation import (SplitStatus, first_order_matrix, laplacian_derivative,
                           nontriviality_probe, simplify_spectrum, variation_formula_geometric)
from .rigidity import constant_rotation_fit, parallel_coefficient_check, rigidity_report
from .spectral import assemble_laplacian, cluster, eigensolve, track_curves

__version__ = "0.1.0"

__all__ = [
    "BochnerError", "DiscreteConnection", "DiscreteSection", "LatticeBase", "SkewField",
    "SplitStatus", "assemble_laplacian", "build_cycle", "build_torus", "cluster",
    "constant_connection_cycle", "constant_rotation_fit", "eigensolve", "equivariant_spectrum",
    "first_order_matrix", "g_simplicity_report", "gauge_transform", "holonomy", "hs_inner",
    "laplacian_derivative", "nontriviality_probe", "parallel_coefficient_check", "perturb",
    "random_connection", "random_skew_field", "rank_one", "rigidity_report", "simplify_spectrum",
    "track_curves", "trivial_connection", "variation_formula_geometric", "wedge",
    "xi_correspondence_check",
]
