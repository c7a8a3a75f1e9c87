"""Lifted-load estimation from 36-channel insole pressure streams.

Pipeline: parse or synthesise 20 Hz sessions, low-pass filter, segment by
the timer schedule, difference lift windows against their baselines, train
one of three regressors, and aggregate per-sample predictions into one
stabilised estimate per 500 ms. Thermal-map rendering and the
inter-subject evaluation protocol round out the toolkit.
"""

from .aggregate import Aggregator, trimmed_mean
from .core import (
    CHANNEL_COUNT,
    FULL_LADDER_KG,
    FULL_SCALE_KG,
    FULL_SCALE_RAW,
    Frame,
    InsoleLoadError,
    LabeledSample,
    PhaseSchedule,
    PipelineConfig,
    RAW_PER_KG,
    SAMPLE_RATE_HZ,
    SessionRecording,
    validate_session,
)
from .dataset import Dataset
from .dsp import (
    BiquadCoefficients,
    baseline_mean,
    design_butterworth,
    differential_features,
    filter_channel,
    filter_frames,
    frequency_response,
)
from .evaluation import (
    EvalReport,
    SplitSpec,
    build_split,
    mae,
    mae_samples,
    mann_whitney_u,
    run_protocol,
)
from .ingest import (
    SessionManifest,
    extract_labeled_samples,
    extract_windows,
    parse_session,
    segment_phases,
)
from .pressmap import (
    ColorScale,
    SensorLayout,
    default_layout,
    fit_color_scale,
    interpolate_map,
    render,
    render_sample,
)
from .regress import (
    ElasticNetModel,
    MlpConfig,
    MlpModel,
    SvrModel,
    SvrParams,
    TrainingReport,
    fit_elastic_net,
    fit_mlp,
    fit_svr,
    load_model,
    predict,
    save_model,
)
from .replay import Estimate, StreamEstimator, estimate_sequence
from .synth import SynthSpec, generate_session, make_archetype, make_corpus, write_session

__version__ = "0.1.0"
