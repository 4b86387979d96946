"""stereopipe: two-stage stereo matching with signed disparity ranges.

Stage 1 computes a semi-dense disparity map directly from feature-map
correlation (MAP disparity with sub-pixel offset and per-pixel reliability,
filtered by left-right consistency and a reliability threshold). Stage 2
densifies it with hierarchical reliability- and color-guided diffusion.
"""
from .core import (DisparityField, DisparityRange, RangeError,
                   downsample_average, enumerate_candidates, upsample_disparity)
from .features import (FeatureMap, FeatureTransform, apply_transform,
                       extract_census_gradient, load_feature_tensor,
                       save_feature_tensor)
from .matcher import (CostVolume, MapEstimate, ProbabilityVolume,
                      build_cost_volume, map_disparity, softmax_over_disparity)
from .filtering import (RegionPartition, derive_regions, lr_consistency_filter,
                        reliability_filter)
from .losses import (AdamConfig, LossBreakdown, TrainingPair, loss_dvr,
                     loss_trr, loss_ur, smooth_l1, tent_weights,
                     train_feature_transform)
from .completion import CompletionConfig, complete, complete_multiscale
from .evalio import (MetricReport, SyntheticScene, evaluate, generate_scene,
                     load_scene, metric_bad, metric_d1, metric_epe, read_kitti_png,
                     read_pfm, save_scene, write_kitti_png, write_pfm)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline

__version__ = "0.1.0"
