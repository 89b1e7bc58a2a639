# coding: utf-8
# # Dense, sparse and kNN attention on a point cloud
#
# Tokens are columns: a cloud of n points becomes a d x n matrix. This
# script builds the dense block, its sparse variants, and checks that
# permuting the points permutes the output.

# %%
import numpy as np

from hamattn.attention import (AttentionPattern, OpCounter, TransformerParams, dense_head,
                               knn_pattern, multi_head_attn, positional_embedding, sparse_head,
                               transformer_block)
from hamattn.pointset import SyntheticSpec, generate_synthetic
from hamattn.sampling import hamiltonian_pattern

rng = np.random.default_rng(0)
cloud = generate_synthetic(SyntheticSpec(points_per_cloud=64, seed=0), 1)[0]
params = TransformerParams.random(h=2, m=4, d=8, r=16, rng=rng)
X = rng.standard_normal((8, cloud.n)) + positional_embedding(cloud.coords, params.W_p)
print("tokens:", X.shape)

# %% [markdown]
# A complete pattern reproduces the dense head.

# %%
W_V, W_K, W_Q = params.W_V[0], params.W_K[0], params.W_Q[0]
dense = dense_head(X, W_V, W_K, W_Q)
sparse = sparse_head(X, AttentionPattern.complete(cloud.n), W_V, W_K, W_Q)
print("complete vs dense:", np.abs(dense - sparse).max())

# %% [markdown]
# Score counts: n^2 for dense, 2n - 1 for the path pattern, n k for kNN.

# %%
for name, pattern in [("dense", None), ("path", hamiltonian_pattern(cloud.n)),
                      ("knn k=8", knn_pattern(cloud.coords, 8))]:
    c = OpCounter()
    multi_head_attn(X, params, pattern, counter=c)
    print(f"{name:8s} scores per head = {c.scores // params.h}")

# %% [markdown]
# Permutation equivariance of the dense block.

# %%
perm = rng.permutation(cloud.n)
feats = X - positional_embedding(cloud.coords, params.W_p)
Xp = feats[:, perm] + positional_embedding(cloud.coords[:, perm], params.W_p)
err = np.abs(transformer_block(Xp, params) - transformer_block(X, params)[:, perm]).max()
print("equivariance error:", err)
