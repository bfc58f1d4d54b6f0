"""Polynomial filters of commuting graph shifts and their inverse filtering."""

from . import errors
from .graphs import (
    Graph,
    adjacency,
    build_circulant,
    build_knn,
    build_path,
    build_random_geometric,
    cartesian_product,
    degree_vector,
    geodesic_width,
    laplacian,
    sym_normalized_laplacian,
)
from .shifts import (
    JointSpectrum,
    KronOperator,
    Shift,
    ShiftFamily,
    circulant_generator_shift,
    circulant_spectrum,
    commutator_norms,
    compute_joint_spectrum,
    dist_to_polynomial_set,
    kron_lift,
    kron_spectrum,
    recover_spectral_multiplier,
    validate_shift,
)

from .polyfilter import ChebCoeffs, PolyCoeffs, apply, apply_cheb, eval_scalar, materialize
from .inverse import (
    arma_solve,
    chebyshev_coeffs,
    fit_rate,
    gd0_solve,
    icpa_solve,
    iopa_solve,
    optimal_poly,
)
from .distnet import Network, sim_filter, sim_inverse

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
