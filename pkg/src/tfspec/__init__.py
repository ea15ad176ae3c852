"""Time-varying spectral estimation for nonstationary processes on a periodic grid."""
__version__ = "0.1.0"

from .core import (
    AmbiguityField,
    TFField,
    hs_inner,
    hs_norm,
    kernel_from_spreading,
    operator_tf_shift,
    shift_operator,
    spreading_function,
    symplectic_dft,
    tf_shift,
    weyl_symbol,
)
from .process import (
    CorrelationModel,
    LTVSystem,
    SpreadSupport,
    correlation_from_system,
    expected_ambiguity,
    observe,
    sample_realization,
    synthesize_underspread_system,
    weyl_heisenberg_reconstruct,
    wigner_ville_spectrum,
)
from .estimator import (
    ErrorReport,
    PrototypeSpec,
    bias_field,
    estimate_spectrum,
    global_error_report,
    gwv_prototype,
    mvub_prototype,
    noise_bias_correct,
    variance_field,
)
from .multiwindow import (
    WindowSet,
    matched_windows,
    multiwindow_prototype,
    optimal_rank,
    sinusoidal_multitaper_estimate,
    sinusoidal_tapers,
)
from .validation import MCReport, appendix_identity_suite, isserlis_check, run_mc

