"""Nonlinear frequency-selective OFDM channel identification with a DCT
coefficient neuron, plus predistortion and iterative-decoding receivers
and a seeded Monte Carlo experiment harness.
"""

from .channel import (
    AmplitudeNonlinearity,
    FirChannel,
    HardClip,
    Identity,
    NoisySnr,
    SoftSine,
    Tabulated,
    apply_nonlinearity,
    draw_channel,
    load_tabulated,
    propagate,
)
from .dct_neuron import (
    DctNeuron,
    cosine_features,
    evaluate,
    evaluate_complex,
    lms_update,
    load_neuron_csv,
    project_function,
    save_neuron_csv,
)
from .detect import (
    DecodeResult,
    Predistorter,
    ber,
    iterative_decode,
    learn_inverse,
    predistort,
    theoretical_ber,
    zf_equalize,
)
from .errors import (
    ArtifactError,
    ConfigError,
    DegenerateEstimateError,
    DomainError,
    InputLengthError,
    ParameterError,
    UndefinedMetricError,
)
from .estimator import (
    ChannelEstimate,
    EstimationResult,
    EstimatorConfig,
    combined_nmse,
    estimate_channel,
    lms_pass,
    nmse_nonlinearity,
    wiener_solve,
)
from .harness import (
    CSV_HEADER,
    DetectorConfig,
    ExperimentConfig,
    InverseConfig,
    ResultRecord,
    build_config,
    derive_trial_seed,
    make_nonlinearity,
    records_to_csv,
    run_ber,
    run_estimation,
    run_experiment,
    run_inverse,
)
from .ofdm import (
    OfdmConfig,
    TimeSignal,
    bits_per_symbol,
    demap,
    map_bits,
    ofdm_demodulate,
    ofdm_modulate,
)

__version__ = "0.1.0"
