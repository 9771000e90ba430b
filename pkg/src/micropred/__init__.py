"""micropred: two-point statistics features and property regression for
two-phase microstructure images.

The pipeline mirrors a common homogenization workflow: section or segment
the input microstructures, compute two-point spatial correlations (or ingest
externally computed descriptors), reduce with PCA, and regress a scalar
property, with split hygiene enforced throughout.
"""

from .dataio import (
    CompositionVector,
    FeatureFileError,
    SampleManifest,
    Volume3D,
    convert_hardness,
    load_manifest,
    load_volume,
    read_features,
    volume_fraction,
    write_features,
    write_manifest,
    write_volume,
)
from .features import (
    FeatureSet,
    FeatureVector,
    Standardizer,
    aggregate,
    aggregate_sets,
    append_composition,
    apply_standardizer,
    fit_standardizer,
)
from .preprocess import (
    GrayImage,
    PhaseMap,
    PreprocessSpec,
    RgbImage,
    SegmentParams,
    bilinear_resize,
    extract_sections,
    load_gray_image,
    preprocess_for_backend,
    segment,
)
from .spatialstats import CorrelationMap, center_crop_map, two_point, vectorize
from .reduction import PCAModel, fit_pca, inverse_transform, scree, transform
from .regression import (
    LinearModel,
    PolyModel,
    SvrConvergenceError,
    SvrModel,
    SvrParams,
    fit_lr,
    fit_pr,
    fit_svr,
    load_model,
    predict,
    save_model,
)
from .evaluation import (
    CVReport,
    GridResult,
    HoldoutResult,
    SplitPlan,
    evaluate_holdout,
    grid_search_pcs,
    holdout_split,
    kfold_ids,
    mape,
    nested_cv,
    write_parity_csv,
    write_report,
)
from .synth import gen_ensemble, gen_volume, planted_property, surface_density
from .pipeline import PipelineStageError, run_pipeline
from .plots import parity_svg, render_parity_svg

__version__ = "0.1.0"
