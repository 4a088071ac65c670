"""Treated/control matching methods, balance diagnostics and a Monte Carlo study engine."""
from .balance import (BalanceReport, balance_report, love_plot_frame,
                      standardized_difference_binary, standardized_difference_continuous,
                      write_love_svg)
from .distance import (CaliperSpec, LogisticModel, MahalanobisContext, caliper_dissimilarity,
                       fit_logistic, logit_caliper_width, mahalanobis, pooled_covariance,
                       propensity_logit, read_calipers, write_calipers)
from .estimation import (EffectEstimate, MethodMetrics, compute_metrics, estimate_log_or,
                         mantel_haenszel_or)
from .matching import (GeneticConfig, MatchResult, match_full, match_genetic,
                       match_largest_caliper, match_nnwor, match_nnwr, match_optimal,
                       run_method)
from .simulation import Scenario, ScenarioResult, run_scenario, scenario_grid
from .study import Study, load_csv, validate, write_csv

__version__ = "0.1.0"
