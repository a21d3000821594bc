"""Multi-label feature selection via Hadamard-product implicit regularization."""

from .dataset import (DatasetError, DatasetSummary, FoldAssignment, MultiLabelDataset,
                      kfold_split, load_dataset, select_features, standardize, summarize)
from .estimator import (DivergenceError, FeatureRanking, MfsirConfig, MfsirModel, fit,
                        gradients, objective, rank_features, sparsity_fraction)
from .graph import build_laplacian, build_similarity, manifold_term
from .metrics import EvaluationResult, evaluate, hamming_loss, macro_auc, macro_f1, ranking_loss
from .mlknn import MlknnModel, mlknn_fit, mlknn_predict
from .stats import MetricTable, average_ranks, friedman, nemenyi_cd, pairwise_significance

__version__ = "0.1.0"
