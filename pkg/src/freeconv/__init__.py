"""Numerical free probability: transforms, free CLT iterates and their densities."""

from .convolution import f_clt, f_free_convolve, f_lower_bound, free_convolve_phi, gamma_n, phi_clt
from .errors import (
    BoundaryError,
    ContinuationError,
    CurveQualityError,
    DegenerateMeasureError,
    DomainError,
    FreeConvError,
    InversionError,
    NumericError,
    SpecError,
    TailMassError,
    UnsupportedMomentError,
)
from .experiment import berry_esseen_sweep, bound_audit, clt_sweep, phi_convergence_audit
from .inversion import (
    cdf_curve,
    density_at,
    density_curve,
    kolmogorov,
    kolmogorov_distance,
    measure_cdf,
    pair_density_curve,
)
from .measure import (
    Affine,
    Arcsine,
    Atomic,
    FreeID,
    GridDensity,
    MarchenkoPastur,
    Measure,
    Mixture,
    Semicircle,
    bernoulli,
    dirac,
    free_id_centered,
    from_spec,
    load_measure,
    mean,
    moment,
    standardize,
    to_spec,
    variance,
)
from .oracle import clt_cumulants, cumulants_to_moments, moments_to_cumulants, noncrossing_partitions
from .transform import Cone, HalfPlanePoint, cauchy_G, f_inverse, f_transform, phi, phi_id, r_transform, verify_bounds

__version__ = "0.1.0"
