"""Binocular face anti-spoofing.

Two complementary features decide whether a detected face is live: a 68-d
template-matched stereo depth vector (flat photo attacks have no facial
relief) and a 3328-d spatial-pyramid micro-texture descriptor over per-pixel
visual words (recaptured images have distinctive texture statistics). Each
feeds an RBF SVM; their decision scores are fused.
"""

from ._accel import NUMBA_ENABLED
from .classifier import (
    EvalReport,
    FeatureScaler,
    FusionRule,
    SvmModel,
    decision_score,
    evaluate,
    fuse,
    train_svm,
)
from .codebook import (
    AverageFace,
    BovwCodeFace,
    Codebook,
    build_average_face,
    encode_bovw,
    train_codebook,
)
from .errors import DegenerateGeometryError, StageError, StereoSpoofError, ValidationError
from .geometry import (
    AbstractFace,
    CameraIntrinsics,
    KeypointPair,
    StereoRig,
    build_abstract_face,
    compose_projection,
    normalize_depths,
    triangulate_depth,
)
from .pipeline import (
    Dataset,
    ManifestEntry,
    ModelBundle,
    PipelineConfig,
    load_inputs,
    run_eval,
    run_predict,
    run_train,
)
from .pyramid import (
    CodeHistogram,
    MatchingDegreeVector,
    PyramidSpec,
    SpmtVector,
    assemble_spmt,
    compute_spmt,
    matching_degree,
    region_histogram,
    subdivide,
)
from .registration import (
    RegistrationConfig,
    SimilarityTransform,
    TemplateFace,
    TfbdVector,
    build_template,
    extract_tfbd,
    register_iterative,
    registration_errors,
    solve_absolute_orientation,
)
from .synth import SynthConfig, synth_generate
from .texture import (
    FaceCrop,
    MslbpFeatureFace,
    Rect,
    UniformMapping,
    build_uniform_mapping,
    crop_and_normalize,
    lbp_uniform,
    mslbp_face,
)

__version__ = "0.1.0"
