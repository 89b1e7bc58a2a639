# coding: utf-8
# # Score counts and wall time
#
# Dense attention evaluates n^2 scores per head; sampled attention with
# window n_s evaluates (n / (n_s - 1)) (2 n_s - 1).

# %%
import time

import numpy as np

from hamattn.attention import OpCounter, TransformerParams, multi_head_attn
from hamattn.sampling import sample_subset_plan, sampled_attention

rng = np.random.default_rng(0)
params = TransformerParams.random(1, 8, 32, 64, rng)
for n in (256, 1024, 4096):
    X = rng.standard_normal((32, n))
    plan = sample_subset_plan(n, 5, rng)
    cd, cs = OpCounter(), OpCounter()
    t0 = time.perf_counter()
    multi_head_attn(X, params, counter=cd)
    t1 = time.perf_counter()
    sampled_attention(X, plan, params, "sequential", cs)
    t2 = time.perf_counter()
    print(f"n={n:5d} dense {cd.scores:9d} sampled {cs.scores:6d} "
          f"count ratio {cd.scores / cs.scores:7.1f} wall ratio {(t1 - t0) / (t2 - t1):6.1f}")
