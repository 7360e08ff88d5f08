"""Sample-and-hold stabilization by inf-convolution of a nonsmooth CLF.

The controller evaluates an approximate Moreau envelope of a control Lyapunov
function at the measured state, steps off the nonsmooth set, and picks an
approximately optimal held control. Optimization accuracies, noise bounds and
the sampling period are explicit inputs, and :mod:`uinfc.bounds` computes
admissible values for them.
"""

from .bounds import BoundsReport, EstimationConfig, compute_bounds, verify_bounds
from .clf import (
    BoxSet,
    ClfSpec,
    abs_clf,
    dini_derivative_fd,
    lambda_V,
    regularize_point,
    rho_V,
    rho_V_inverse,
)
from .controller import StepDiagnostics, UinfcParams, select_control, uinfc_step
from .endi import ThetaGrid, endi_clf_value, f_tilde, grad_f_tilde, kappa_ni, make_endi_clf, v_tilde
from .errors import (
    ConfigurationError,
    DivergenceError,
    EvaluationError,
    InfeasibleError,
    ParameterError,
    RegularizationError,
    ResourceError,
    SolverError,
    UinfcError,
)
from .infconv import (
    InfConvResult,
    check_prox_subgradient,
    check_sandwich,
    moreau_envelope,
    reference_envelope,
)
from .sim import ShRunConfig, TrajectoryLog, Verdict, check_practical_stability, decay_audit, simulate
from .systems import ENDI, INTEGRATOR_1D, NI, Dynamics, NoiseModel, emit_noise, endi_rhs, ni_rhs

__version__ = "0.1.0"
