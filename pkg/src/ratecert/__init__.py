"""Anchored fixed-point iterations on geodesic spaces, with verifiable
rate certificates for asymptotic regularity and metastability."""

from .spaces import (
    AxiomReport,
    DomainError,
    EuclideanSpace,
    L1Space,
    LinfSpace,
    ShapeError,
    Space,
    StarTreeSpace,
    check_axioms,
    check_metric,
    make_space,
)
from .operators import (
    BoundConstants,
    ConfigError,
    NonexpansiveMap,
    ZooInstance,
    bound_constants,
    default_zoo,
    make_operator,
    sample_nonexpansiveness,
)
from .schedules import (
    Schedule,
    ScheduleModuli,
    ScheduleError,
    affine_modulus,
    constant_schedule,
    custom_schedule,
    harmonic_schedule,
    psi_from_schedule,
    sabach_schedule,
    validate_moduli,
)
from .iterations import (
    LinkReport,
    Trajectory,
    check_link,
    linked_start,
    modified_halpern_run,
    residuals,
    tikhonov_mann_run,
)
from .rates import (
    ConsistencyError,
    LinearEnvelope,
    RateCertificate,
    ceil_log,
    check_envelope,
    companion_gap_rate,
    empirical_certificate,
    empirical_rate_table,
    linear_envelopes,
    mh_fixed_point_rate,
    mh_psi,
    mh_rates_from_tm,
    mh_step_rate_div,
    mh_step_rate_prod,
    mh_tail_index,
    sabach_shtern_check,
    standard_certificates,
    tm_rates_from_mh,
    transfer_rate,
    verify_certificate,
)
from .metastability import (
    MetaRate,
    counter_preset,
    empirical_meta,
    empirical_meta_rate,
    transform_meta,
    verify_meta,
)

__version__ = "0.1.0"
