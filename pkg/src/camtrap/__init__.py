"""Camera-trap animal segmentation and genus classification.

Texture-blended robust PCA separates moving animals from static backgrounds,
merged foreground regions are matched to ground truth by IoU, crops become
feature vectors, a cross-validated lasso selects the useful ones, and an
RBF SVM or a three-hidden-layer network classifies genera plus a
false-positive class.
"""

from .evaluate import EvaluationReport, evaluate, sparsity_report, table_report
from .features import (FeatureMatrix, StandardizationParams, concat_features,
                       extract_builtin, import_external, standardize)
from .imaging import (clahe, clahe_color, crop_resize, lbp_map, load_image,
                      morph_clean, otsu_threshold, to_grayscale)
from .lasso import FeatureSupport, LassoModel, cv_select, lasso_fit, select_support
from .manifest import (FP_NAME, DatasetManifest, GenusLabel, ManifestError,
                       SampleRecord, SplitAssignment, balance_classes, load_manifest,
                       save_manifest, stratified_split)
from .mlp import MlpConfig, MlpModel, mlp_predict, mlp_train, mlp_width_search
from .pipeline import ExperimentSpec, PipelineError, run_experiment
from .regions import (BoundingBox, Region, assign_regions, connected_components,
                      iou, merge_rois)
from .rpca import (DataMatrix, RpcaConfig, RpcaResult, build_data_matrix,
                   foreground_masks, soft_threshold, solve_rpca, svt)
from .svm import SvmConfig, SvmModel, svm_grid_search, svm_predict, svm_train
from .synthetic import SceneConfig, gen_synthetic, save_synthetic

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
