"""boundkey: four-qubit PPT-invariant states with distillable cryptographic key.

Construction, certification, key-rate bounds, and simulation of a
local-measurement verification scheme for a family of bound entangled
states carrying private correlations.
"""
__version__ = "0.1.0"

from .keyrate import (
    BoundsReport,
    CcqState,
    CertificationInfeasibleError,
    ErResult,
    SeparableWitness,
    TwirlSpectrum,
    TwistingUnitary,
    bell_twirl,
    binary_entropy,
    canonical_twisting,
    ccq_from_state,
    certified_bounds,
    dw_rate,
    er_upper_bound,
    holevo_rate,
    privacy_squeeze,
    recurrence_step,
    rel_entropy,
)
from .linalg import (
    DensityOperator,
    MultipartiteOperator,
    as_state,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    tensor,
    trace_norm,
    von_neumann_entropy,
)
from .observables import (
    CollectiveSetting,
    PauliDecomposition,
    SettingsCover,
    VerificationObservables,
    build_observables,
    default_candidates,
    estimable_functionals,
    expansion_differences,
    expectation,
    min_settings_cover,
    pauli_decompose,
    reference_expansions,
    setting_from_names,
    tilde_bell_states,
)
from .ppt import (
    ExtremalityPoint,
    RobustnessPoint,
    RobustnessReport,
    extremality_scan,
    ppt_check,
    ppt_invariance,
    robustness_scan,
    robustness_threshold,
    twirl_hashing_bound,
)
from .serialize import (
    load_records,
    load_state,
    save_records,
    save_state,
    scheme_hash,
)
from .shots import (
    EstimateReport,
    ShotRecord,
    certify,
    estimate_parameters,
    exact_record,
    outcome_distribution,
    sample_prepared,
    sample_scheme,
    sample_setting,
)
from .states import (
    KeyMixture,
    PreparedComponent,
    PureComponent,
    bell_states,
    depolarize,
    flip_operator,
    fourier,
    hadamard,
    key_ratio,
    mixture_from_unitary,
    pbit_from_X,
    rho_from_mixture,
    rho_h,
    rho_h_components,
    rho_h_mixture_form,
    rho_h_preparation,
    rho_h_weights,
    rho_u,
    state_from_components,
)

__all__ = [
    "__version__",
    "BoundsReport",
    "CcqState",
    "CertificationInfeasibleError",
    "CollectiveSetting",
    "DensityOperator",
    "ErResult",
    "EstimateReport",
    "ExtremalityPoint",
    "KeyMixture",
    "MultipartiteOperator",
    "PauliDecomposition",
    "PreparedComponent",
    "PureComponent",
    "RobustnessPoint",
    "RobustnessReport",
    "SeparableWitness",
    "SettingsCover",
    "ShotRecord",
    "TwirlSpectrum",
    "TwistingUnitary",
    "VerificationObservables",
    "as_state",
    "bell_states",
    "bell_twirl",
    "binary_entropy",
    "build_observables",
    "canonical_twisting",
    "ccq_from_state",
    "certified_bounds",
    "certify",
    "default_candidates",
    "depolarize",
    "dw_rate",
    "er_upper_bound",
    "estimable_functionals",
    "estimate_parameters",
    "exact_record",
    "expansion_differences",
    "expectation",
    "extremality_scan",
    "flip_operator",
    "fourier",
    "hadamard",
    "holevo_rate",
    "key_ratio",
    "load_records",
    "load_state",
    "min_settings_cover",
    "mixture_from_unitary",
    "outcome_distribution",
    "partial_trace",
    "partial_transpose",
    "pauli_decompose",
    "pbit_from_X",
    "permute_subsystems",
    "ppt_check",
    "ppt_invariance",
    "privacy_squeeze",
    "recurrence_step",
    "reference_expansions",
    "rel_entropy",
    "rho_from_mixture",
    "rho_h",
    "rho_h_components",
    "rho_h_mixture_form",
    "rho_h_preparation",
    "rho_h_weights",
    "rho_u",
    "robustness_scan",
    "robustness_threshold",
    "sample_prepared",
    "sample_scheme",
    "sample_setting",
    "save_records",
    "save_state",
    "scheme_hash",
    "setting_from_names",
    "state_from_components",
    "tensor",
    "tilde_bell_states",
    "trace_norm",
    "twirl_hashing_bound",
    "von_neumann_entropy",
]
