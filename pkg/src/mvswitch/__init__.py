"""Mean-field SDEs whose diffusion switches on the moment ``E|X - z|^p``."""

from .config import PRESETS, dump_spec, load_spec, parse_spec, spec_from_dict, spec_to_dict
from .curve import Crossing, MomentCurve, Provenance, read_csv
from .errors import BlowUp, DomainError, MVSwitchError, PreconditionError, SpecError, UnsupportedSpecError
from .lifetime import (
    Classification,
    Engine,
    LifetimeReport,
    LifetimeVerdict,
    SeriesSpec,
    analytic_moment_curve,
    classify_series,
    construct_lifetime,
    ladder_crossing_times,
)
from .metrics import EmpiricalSample, coupling_inequality_check, wasserstein_1d, wasserstein_to_dirac
from .model import (
    ConstantDiffusion,
    ConstantDrift,
    EquationSpec,
    Family,
    InitialLaw,
    LevelRule,
    LinearDrift,
    RegimeCoefficients,
    Side,
    ThresholdPartition,
    validate,
)
from .moment import (
    ExistenceVerdict,
    VerdictKind,
    check_nonexistence,
    nonunique_moment_family,
    regime_moment_functions,
    solve_moment_equation,
)
from .oscillation import OscillationSchedule, kappa, m_of_s_caseformula, solve_delayed_equation, verify_collapse_bound
from .simulate import ParticleEnsemble, SimConfig, estimate_moment, run, step

__version__ = "0.1.0"
