# coding: utf-8
# # Random Hamiltonian cycles and sampled attention
#
# A subset plan splits a random ordering of the points into windows of
# n_s - 1 points; each window also sees the first point of the next one.
# Chaining the windows traces a uniformly random Hamiltonian cycle.

# %%
import numpy as np

from hamattn.attention import TransformerParams
from hamattn.sampling import (edge_coverage, edge_coverage_exhaustive, induced_cycle,
                              sample_subset_plan, sampled_attention, sampled_score_count,
                              window_columns)

plan = sample_subset_plan(12, 4, seed=1)
print("blocks:", plan.blocks)
print("window 0 columns:", window_columns(plan, 0))
print("cycle:", induced_cycle(plan).order)

# %% [markdown]
# Every unordered pair is a cycle edge with probability 2 / (n - 1).

# %%
exact = edge_coverage_exhaustive(4)
print("n=4 exhaustive frequencies:\n", exact.frequency())
mc = edge_coverage(12, 4, 20000, seed=0)
print("n=12 expected", round(mc.expected_frequency(), 4), "max deviation", mc.max_deviation())

# %% [markdown]
# Deviation shrinks roughly like 1 / sqrt(S).

# %%
rng = np.random.default_rng(0)
for S in (100, 1000, 10000):
    print(S, edge_coverage(12, 4, S, rng).max_deviation())

# %% [markdown]
# Sequential mode feeds each window's output into the next; parallel mode
# is attention over the induced cycle.

# %%
params = TransformerParams.random(2, 4, 8, 16, rng)
X = rng.standard_normal((8, 12))
seq = sampled_attention(X, plan, params, "sequential")
par = sampled_attention(X, plan, params, "parallel")
print("modes differ by", np.abs(seq - par).max())
print("scores per head:", sampled_score_count(12, 4), "vs dense", 12 * 12)
