"""Gaussian-beam spherical harmonics, lens-space symmetries and their phase-space measures."""

from .geom import (
    CanonicalForm,
    OrientedGeodesic,
    apply_isometry,
    block_rotation,
    canonical_form,
    complexify,
    geodesic_from_frame,
    geodesics_equal,
    random_geodesic,
    realify,
    standard_geodesic,
)
from .groups import (
    FiniteGroup,
    StandardGroupSpec,
    build_chi,
    conjugate_group,
    coset_representatives,
    invariant_dimension,
    is_cyclic,
    is_fixed_point_free,
    make_group,
    stabilizer,
    standardize_stabilizer,
)
from .harmonics import (
    HarmonicSum,
    beam,
    compose_isometry,
    coset_average,
    eigen_residual,
    evaluate,
    group_average,
    inner_product,
    normalization_constant,
)
from .measures import (
    Dictionary,
    GeodesicMeasure,
    HusimiField,
    average_measure,
    husimi,
    line_integral,
    mutually_singular,
    pair_husimi,
    position_pairing,
    pushforward,
    quotient_husimi_atoms,
    quotient_pairing,
    realize_measure,
    weak_star_discrepancy,
)
from .quadrature import quadrature_rule

__version__ = "0.1.0"
