# coding: utf-8
# # Toy point-cloud classification
#
# Three synthetic shape classes, one attention block, max pooling and a
# linear classifier, trained with hand-written gradients. This run is
# small so it finishes in seconds; the acceptance suite uses n = 256.

# %%
import numpy as np

from hamattn.pointset import SyntheticSpec, generate_synthetic, split_dataset
from hamattn.training import (Model, TrainConfig, backward, finite_diff_grad, forward_loss,
                              gradient_relative_errors, model_loss_fn, train)
from hamattn.sampling import sample_subset_plan

clouds = generate_synthetic(SyntheticSpec(points_per_cloud=64, seed=0), 40)
train_set, test_set = split_dataset(clouds, 0.2, seed=0)
print(len(train_set), "train,", len(test_set), "test")

# %% [markdown]
# Gradient check against central differences.

# %%
cfg = TrainConfig(kind="sampled", h=2, m=4, d=8, r=16, n_s=5)
model = Model.init(cfg, 3, 3, np.random.default_rng(0))
batch = train_set[:2]
plan = sample_subset_plan(64, 5, 0)
_, cache = forward_loss(batch, model, cfg, plan)
fd = finite_diff_grad(model_loss_fn(model, batch, cfg, plan), model.params(), 1e-5)
print("worst relative error:", max(gradient_relative_errors(backward(cache), fd).values()))

# %%
for kind in ("dense", "sampled", "none"):
    _, history = train(train_set, test_set, TrainConfig(kind=kind, epochs=5, seed=0))
    last = history[-1]
    print(f"{kind:8s} test accuracy {last['accuracy']:.3f} loss {last['loss']:.3f}")
