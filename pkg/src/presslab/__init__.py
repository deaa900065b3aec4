"""Weighted topological pressure and its variational principle on shifts of finite type."""

__version__ = "0.1.0"

from .errors import CapExceededError, ConfigError, EmptySystemError, PresslabError, WindowTooSmallError
from .window import BoxWindow, BoundarySet, boundary_ratio, k_boundary, standard_folner
from .shiftspace import (
    Alphabet,
    BlockCode,
    FiberSystem,
    Pattern,
    ShiftSystem,
    apply_code,
    collapse_code,
    count_patterns,
    enumerate_patterns,
    fiber_product,
    full_shift,
    golden_mean,
    hard_square,
    identity_code,
    product_shift,
)
from .potential import Potential, birkhoff_sum, cylinder_sup, integrate
from .pressure import (
    PressureReport,
    WeightedInstance,
    conditional_entropy_top,
    plain_pressure,
    pressure_estimate,
    weighted_partition,
)
from .measure import (
    EntropyEstimate,
    MarkovMeasure,
    MixtureMeasure,
    PatternWeights,
    ProductMeasure,
    cylinder_prob,
    entropy_rate,
    gibbs_candidate,
    partition_entropy,
    project_to_family,
    pushforward_entropy,
    pushforward_weights,
    weighted_entropy,
)
from .variational import (
    Budget,
    EquilibriumCheck,
    SandwichCertificate,
    VariationalResult,
    carpet_dimension,
    entropy_from_pressure,
    equilibrium_check,
    gibbs_warm_start,
    mcmullen_dimension,
    measure_criterion,
    optimize,
    pressure_properties_suite,
    sandwich,
)
