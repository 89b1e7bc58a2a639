# coding: utf-8
# # Exact contextual-mapping certificate
#
# Grid inputs are pushed through selective shifts and all-max shifts in
# exact rational arithmetic. The certificate checks that ids are distinct
# within each input and disjoint across inputs.

# %%
from fractions import Fraction

import numpy as np

from hamattn.verifier import (VerifierConfig, build_schedule, contextual_map, quantize_to_grid,
                              verify_contextual_mapping)

config = VerifierConfig(2, 1, Fraction(1, 2))
schedule = build_schedule(config)
print(len(schedule.selective), "selective shifts,", len(schedule.all_max), "all-max shifts")

# %%
gp = quantize_to_grid(np.array([[Fraction(0), Fraction(0)]]), config.delta)
ids = contextual_map(gp, config, schedule)
print("after selective shifts:", ids.selective)
print("final ids:", ids.q)

# %%
for n, d in [(2, 1), (3, 1), (2, 2)]:
    r = verify_contextual_mapping(VerifierConfig(n, d, Fraction(1, 2)))
    print(n, d, "PASS" if r.passed else "FAIL", r.inputs, "inputs", r.ids, "ids",
          "min gap", r.min_id_gap)

# %% [markdown]
# Without the all-max stage two inputs share an id.

# %%
r = verify_contextual_mapping(config, skip_allmax=True)
print("PASS" if r.passed else "FAIL", r.witnesses[0])
