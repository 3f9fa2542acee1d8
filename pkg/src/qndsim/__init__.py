"""State-vector simulation of two atomic samples entangled by QND photon counting."""

__version__ = "0.1.0"

from .errors import (
    ImpossibleOutcomeError,
    InvalidArgumentError,
    InvalidStateError,
    UnsupportedConfigurationError,
)
from .measurement import (
    ClickRecord,
    Detector,
    PeakPrediction,
    click_probabilities,
    entangling_factor,
    predict_peak,
    project_on_click,
    sample_click,
)
from .metrics import (
    MetricsSample,
    entanglement_entropy,
    measure,
    overlap_psi0,
    psi0_state,
    reduced_density_matrix,
    variance_jz_sum,
)
from .spin import (
    JointAmplitudes,
    RotationMatrix,
    SpinBasis,
    binomial_initial_state,
    ladder_coefficient,
    make_basis,
    rotate_opposite,
    rotation_matrix,
    spin_expectations,
)
from .trajectory import (
    BatchResult,
    Protocol,
    ProtocolConfig,
    TrajectoryTrace,
    run_batch,
    run_protocol_a,
    run_protocol_b,
    run_protocol_c,
)
