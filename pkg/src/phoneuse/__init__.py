"""Detection of in-vehicle smartphone hand-usage from 6-axis IMU streams."""

from .imu import DEFAULT_FS_HZ, ImuSample, NormSample, SampleRate, compute_norms
from .features import (FEATURE_NAMES, FeatureMask, FeaturePipeline, FeatureTable,
                       FeatureVector, apply_mask, enumerate_masks)
from .svm import Dataset, LinearModel, TrainConfig, load_model, predict, save_model, train
from .evaluate import (EvalReport, PredictionTrace, count_spikes, evaluate_model, score,
                       steady_state_score, sweep, transient_analysis)
from .synthgen import ScenarioSchedule, ScenarioSpec, generate, generate_trip

__version__ = "0.1.0"
