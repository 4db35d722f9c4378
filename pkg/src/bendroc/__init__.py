"""Per-bin decision thresholds that reshape a classifier's ROC curve."""

from .binning import BinPartition, make_equal_width_partition, make_quantile_partition
from .dataio import ScoredDataset, Schema, parse_dataset, read_dataset, split_dataset
from .model import BinModel, BinStats, fit_bin_model
from .oer import SolverConfig, ThresholdCurve, grid_oracle, solve_closed_form, solve_gradient, sweep_lambda
from .roc import RocCurve, auc, auc_pairwise, fixed_threshold_curve, oer_curve, rocch

__all__ = [
    "BinModel", "BinPartition", "BinStats", "RocCurve", "Schema", "ScoredDataset",
    "SolverConfig", "ThresholdCurve", "auc", "auc_pairwise", "fit_bin_model",
    "fixed_threshold_curve", "grid_oracle", "make_equal_width_partition",
    "make_quantile_partition", "oer_curve", "parse_dataset", "read_dataset", "rocch",
    "solve_closed_form", "solve_gradient", "split_dataset", "sweep_lambda",
]
