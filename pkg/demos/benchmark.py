"""Prediction benchmark and grasp campaign at reduced size; prints the tables."""
from softkoop.eval import (benchmark_predictors, format_grasp_table, format_prediction_table,
                           format_timing_table, grasp_campaign)
from softkoop.io import ExperimentConfig

cfg = ExperimentConfig(bench_repetitions=3, grasp_repetitions=2)
report = benchmark_predictors(cfg, seed=1)
print(format_prediction_table(report, n_t=5))
print(format_timing_table(report))

grasps = grasp_campaign(cfg, seed=1, objects=(1, 3, 6))
print(format_grasp_table(grasps))
