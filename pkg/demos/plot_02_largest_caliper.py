"""
Largest caliper matching
========================

Every treated/control pair whose covariates all fall within their calipers
is acceptable. Acceptable pairs chain together into clusters and subjects
with no acceptable partner are dropped.
"""

import numpy as np
from lcmatch import CaliperSpec, Study, match_largest_caliper
from lcmatch.matching import acceptability_graph

x = np.array([[1.0, 0], [5.0, 1], [9.0, 0],      # treated
              [1.3, 0], [1.9, 0], [5.2, 1], [20.0, 1]])
z = np.array([1, 1, 1, 0, 0, 0, 0])
study = Study(x, z, covariate_names=("age", "smoker"))

# half a unit on age; 0.5 on a 0/1 column means exact agreement
calipers = CaliperSpec.for_study(study, {"age": 0.5, "smoker": 0.5})
print(acceptability_graph(study, calipers).astype(int))

match = match_largest_caliper(study, calipers)
for c in match.clusters:
    print("treated", c.treated, "controls", c.controls, f"weight {c.weight:.2f}")
print("discarded:", match.discarded_treated, match.discarded_controls)

###############################################################################
# Frequency weights used downstream. Within each role they sum to the number
# of matched subjects of that role.
w = match.subject_weights(study.n)
print(np.round(w, 3))

###############################################################################
# A data-driven default: a fraction of each continuous covariate's standard
# deviation, exact matching on binary columns.
print(CaliperSpec.default_for_study(study, sd_fraction=0.4).widths)
