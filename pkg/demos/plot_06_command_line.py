"""
The command-line pipeline
=========================

match, balance and estimate read each other's CSV files. Every output gets
a manifest with the arguments, seed and file digests.
"""

import json
import subprocess
import sys

import numpy as np
from lcmatch import write_csv
from lcmatch.simulation import Scenario, calibrate, simulate_dataset

sc = Scenario("mixed", prevalence=0.3, n=1500)
study, _ = simulate_dataset(sc, calibrate(sc, seed=2, calibration_n=200_000),
                            np.random.default_rng(2))
write_csv(study, "cohort.csv")


def lcmatch(*args):
    cmd = [sys.executable, "-m", "lcmatch", *args]
    print("$ lcmatch", " ".join(args))
    subprocess.run(cmd, check=True)


cohort = ["--input", "cohort.csv", "--treatment", "z", "--outcome", "y"]
lcmatch("match", *cohort, "--method", "lc", "--out", "lc.csv")
lcmatch("match", *cohort, "--method", "opt", "--out", "opt.csv")
lcmatch("balance", *cohort, "--matches", "lc.csv", "opt.csv", "--out", "balance.csv",
        "--svg", "balance.svg")
lcmatch("estimate", *cohort, "--matches", "lc.csv", "opt.csv", "--out", "effects.csv")
print(open("effects.csv").read())

with open("lc.csv.manifest.json") as fh:
    print(json.dumps({k: v for k, v in json.load(fh).items() if k != "args"}, indent=1))
