"""Heat trace, zeta function and spectral action of the standard Podles sphere."""

from .action import (
    GammaDensity,
    GaussianDensity,
    PointMass,
    Step,
    WeightedPolyPointMass,
    action_direct,
    action_exact,
    action_simplified_direct,
    action_simplified_exact,
    eta_kernel,
    moment,
    parse_cutoff,
)
from .errors import DomainError, NumericError, ParameterError, PoleError, PrecisionWarning, QSphereError
from .heattrace import (
    heat_coefficients,
    small_t_fit,
    trace_classical,
    trace_direct,
    trace_residue,
    trace_simplified_direct,
    trace_simplified_residue,
)
from .podles import build_rep, check_real_structure, check_relations, fluctuated_trace, one_form
from .qspec import QParams, eigenvalue_full, eigenvalue_simplified, multiplicity, q_number
from .zeta import SeriesControl, laurent_at_pole, pole_scan, zeta_continued, zeta_direct, zeta_simplified

__version__ = "0.1.0"
