"""
Checking covariate balance
==========================

Standardized differences before and after matching, written as a table
and as a dot plot.
"""

import numpy as np
from lcmatch import (CaliperSpec, balance_report, love_plot_frame, match_largest_caliper,
                     match_nnwor, write_love_svg)
from lcmatch.simulation import Scenario, calibrate, simulate_dataset

sc = Scenario("mixed", prevalence=0.25, n=2000)
study, _ = simulate_dataset(sc, calibrate(sc, seed=0, calibration_n=200_000),
                            np.random.default_rng(0))

lc = match_largest_caliper(study, CaliperSpec.default_for_study(study))
greedy = match_nnwor(study)

for m in (lc, greedy):
    rep = balance_report(study, m, threshold=0.1)
    print(rep.to_frame()[["name", "kind", "d_unmatched", "d_matched"]].round(3))
    print(f"{m.method}: {rep.n_over_unmatched} covariates over 0.1 before, "
          f"{rep.n_over_matched} after")

frame = love_plot_frame(study, [greedy, lc])
write_love_svg(frame, "balance.svg", threshold=0.1)
print("wrote balance.svg")
