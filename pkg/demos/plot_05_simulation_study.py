"""
A small Monte Carlo comparison
==============================

Bias, empirical SD and RMSE of the log odds ratio for several methods,
over a sweep of treatment prevalences.
"""

from lcmatch.simulation import PREVALENCES, Scenario, results_frame, run_scenario

results = []
for p in PREVALENCES:
    sc = Scenario("indep-normal", prevalence=p, n=1000, tau=0.5)
    results.append(run_scenario(sc, ["unmatched", "adjusted", "full", "lc"], n_reps=50,
                                seed=1, calibration_n=200_000))

df = results_frame(results)
print(df.round(3).to_string(index=False))

# precision improves as more subjects are treated
print(df.pivot(index="prevalence", columns="method", values="sd").round(3))
