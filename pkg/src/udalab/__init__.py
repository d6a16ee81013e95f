"""Desk-scale universal domain adaptation laboratory."""

from .bound import (BoundInputs, bound_decomposition, complexity_term, default_vc_dim,
                    lambda_oracle, property_scan, proxy_divergence, risk_bound)
from .evaluation import (EvalReport, Prediction, collect_weight_groups, infer,
                         infer_batch, per_class_gain, uda_accuracy,
                         weight_density_groups)
from .mlp import (GradientSet, Layer, MlpParams, cross_entropy, finite_diff_gradient,
                  grl_scale, init_mlp, l2_normalize_rows, mlp_backward, mlp_forward,
                  sgd_step, weighted_bce)
from .scenario import (Dataset, LabelSets, Sample, ScenarioConfig, balanced_batches,
                       build_scenario, jaccard_index, xi_from_fractions)
from .trainer import (AdaptationModel, TrainConfig, TrainTrace, build_model, classify,
                      classifier_objective, domain_objective, fit, source_error,
                      train_step, uan_weights)
from .weighting import (MarginRegister, NormalizationConfig, WeightBatch,
                        batch_margin_vector, normalize_weights, prediction_margin,
                        source_weights, target_weights, tmr_update)

__version__ = "0.1.0"
