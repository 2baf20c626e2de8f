"""Mean-field particle systems with singular interactions: simulation,
McKean--Vlasov solvers, path-space rate functions and exact finite-alphabet
Gibbs computations."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BlowUpError,
    ConfigError,
    DegenerateSystemError,
    DimensionError,
    DomainError,
    EnumerationBudgetError,
    IllNormalizedMeasureError,
    InadmissibleDriftError,
    NumericalError,
    SingdiffError,
    SingularEvaluationError,
    UnsupportedFamilyError,
    WeightCollapseError,
)
from .kernels import (  # noqa: F401
    DriftSpec,
    KPointKernel,
    MeasureDrift,
    PairKernel,
    constant_drift,
    lpq_admissible,
    ou_drift,
    pair_drift,
    power_law_admissible,
    zero_drift,
)
from .paths import Gaussian, PointMass, SeedSpec, TimeGrid, UniformBall  # noqa: F401
