"""Mean oriented Riesz features (MORF) for subtle-motion classification."""

from .image import ImagePyramid, build_pyramid, collapse_pyramid, read_frame
from .riesz import (
    AmplitudeField,
    MonogenicLevel,
    QuatPhaseField,
    TemporalFilterConfig,
    amplify_phase,
    extract_quat_phase,
    filter_phase_sequence,
    phase_difference,
    riesz_transform,
)
from .morf import (
    MorfDescriptor,
    MorfParams,
    MorPair,
    extract_morf,
    grid_histogram,
    magnitude_orientation,
    mean_oriented_riesz,
)
from .dataset import DatasetManifest, SequenceAnnotation, load_manifest, load_sequence, loso_splits
from .classify import KernelParams, Metrics, SvmModel, evaluate_loso, grid_search, predict, train_svm

__version__ = "0.1.0"
