"""Hidden-outlier generation: points on which a full-space detector and a
subspace ensemble disagree, found by bisection along rays from the data.
"""

__version__ = "0.1.0"

from .baselines import HiddenConfig, HyperboxResult, hidden_generate, hyperbox_generate
from .bisection import (BisectConfig, BisectOutcome, GenerationReport, Ray,
                        TInterval, bisect_one, cut_trick_interval, generate_batch,
                        make_ray, sample_direction, select_origin, worst_case_iters)
from .core import (ConfigError, CsvParseError, Dataset, GenerationError, Side,
                   Subspace, TriState, convex_point, max_norm, project)
from .data import (GaussianSpec, downsample_outliers, gen_gaussian_clusters,
                   load_csv, save_csv, split_occ, split_sod)
from .detectors import (DetectorKind, DetectorSpec, FittedDetector,
                        calibrate_threshold, classify, knn_score, lof_score)
from .ensemble import (SubspaceEnsemble, ensemble_classify, fit_ensemble,
                       indicator_f, select_subspaces)
from .evaluate import (BenchResult, EvalResult, Forest, ForestSpec,
                       bench_generation, forest_proba, forest_train, roc_auc,
                       run_occ, run_sod, wilcoxon_signed_rank)
