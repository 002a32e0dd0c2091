"""Self-affine measures: word algebra, Fourier transforms, sphere walks and renewal checks."""

from .errors import (
    AffourierError,
    BudgetExceeded,
    DimensionNot2,
    EmptyPool,
    Inconclusive,
    IndexOutOfRange,
    InsufficientAtoms,
    InsufficientSamples,
    NoConvergence,
    NonNegativeLyapunov,
    SingularMatrix,
    StepCapExceeded,
    SystemFormatError,
    ValidationError,
)
from .ifs import (
    AffineSystem,
    StoppingSet,
    Word,
    all_words,
    attractor_ball,
    compose,
    load_system,
    make_system,
    norm_family,
    parse_system,
    stopping_set,
    validate,
)
from .fourier import (
    FourierQuery,
    SamplePool,
    barycenter,
    chaos_sample,
    check_cs_bound,
    fourier_mc,
    fourier_recursive,
    frostman,
    tube_mass,
)
from .sphere import (
    ConeReport,
    EmpiricalSphereMeasure,
    WalkLaw,
    cocycle,
    detect_cone,
    guivarch_check,
    lyapunov,
    stationary,
)
from .renewal import TestFunction, renewal_Et, renewal_limit, renewal_residue, renewal_sweep
from .transfer import CircleGrid, leading_modulus, spectral_scan, transfer_apply
from .semigroup import PropertyVerdict, irreducibility_test, proximality_witness
from .decay import DecayReport, SweepPlan, decay_sweep, schedule_st
from .report import run_report

__version__ = "0.1.0"
