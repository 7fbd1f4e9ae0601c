"""Sequential delay-Doppler estimation for sub-Nyquist pulse-Doppler radar.

Pipeline: synthesise a target scene at the Nyquist rate, compress each
pulse with an abstract measurement matrix, estimate the distinct Doppler
shifts by subspace methods on the transposed data, isolate one compressed
measurement vector per Doppler group through the steering-stack
pseudo-inverse, and recover delays/gains per group by greedy pursuit with
continuous refinement.
"""

from .config import (
    ExperimentConfig,
    EstimatorSettings,
    PursuitSettings,
    SceneSpec,
    SweepSettings,
    default_config,
    load_config,
)
from .decompose import (
    DopplerMatrix,
    PerDopplerVector,
    build_doppler_matrix,
    combining_vector,
    pinv_decompose,
    snr_gain,
)
from .doppler import (
    DegenerateSubspaceError,
    DopplerEstimate,
    dft_doppler,
    esprit_doppler,
    esprit_fb_doppler,
    estimate_model_order,
    merge_close,
    steering_vector,
)
from .experiment import (
    SceneInfeasibleError,
    SweepResult,
    TrialRecord,
    random_scene,
    run_pipeline,
    run_sweep,
    run_timing,
    run_trial,
)
from .measurement import (
    DataMatrix,
    MeasurementMatrix,
    NoiseSpec,
    assemble_data,
    compress,
    make_fourier_selector,
    make_gaussian,
    matrix_from_spec,
    matrix_spec,
    nyquist_noise,
    snr_to_psd,
)
from .metrics import (
    CellSizes,
    CrbReport,
    MatchResult,
    UndefinedMetricError,
    crb,
    empirical_snr,
    match_targets,
    rrmse,
    select_top_k,
)
from .pursuit import (
    DelayDictionary,
    GroupEstimate,
    PursuitConfig,
    build_dictionary,
    estimate_all,
    pursue_group,
)
from .scene import (
    RadarParams,
    Scene,
    Target,
    atom_derivative,
    atom_samples,
    echo_nyquist,
    group_by_doppler,
    lfm_baseband,
)

__version__ = "0.1.0"
