"""Sparse point-set attention over random Hamiltonian cycles.

Modules:

- :mod:`hamattn.core` -- column softmax, hardmax, exact scalars
- :mod:`hamattn.pointset` -- point clouds, synthetic shapes, XYZ files
- :mod:`hamattn.attention` -- dense and pattern-restricted transformer blocks
- :mod:`hamattn.sampling` -- random element sampling and edge coverage
- :mod:`hamattn.verifier` -- exact contextual-mapping certificate
- :mod:`hamattn.training` -- hand-written backward passes and a toy classifier
- :mod:`hamattn.cli` -- ``hamattn`` command-line entry point
"""

__version__ = "0.1.0"

from .attention import (AttentionPattern, OpCounter, TransformerParams, dense_head, knn_pattern,
                        load_params, multi_head_attn, positional_embedding, save_params,
                        sparse_head, transformer_block)
from .pointset import (PointSet, SyntheticSpec, generate_synthetic, read_manifest, read_xyz,
                       split_dataset, write_xyz)
from .sampling import (EdgeFrequencyMap, HamiltonianCycle, SubsetPlan, edge_coverage,
                       edge_coverage_exhaustive, hamiltonian_pattern, sample_subset_plan,
                       sampled_attention, sampled_transformer_block)
from .training import TrainConfig, backward, finite_diff_grad, forward_loss, train
from .verifier import VerifierConfig, contextual_map, verify_contextual_mapping

__all__ = [
    "AttentionPattern", "OpCounter", "TransformerParams", "dense_head", "knn_pattern",
    "load_params", "multi_head_attn", "positional_embedding", "save_params", "sparse_head",
    "transformer_block", "PointSet", "SyntheticSpec", "generate_synthetic", "read_manifest",
    "read_xyz", "split_dataset", "write_xyz", "EdgeFrequencyMap", "HamiltonianCycle",
    "SubsetPlan", "edge_coverage", "edge_coverage_exhaustive", "hamiltonian_pattern",
    "sample_subset_plan", "sampled_attention", "sampled_transformer_block", "TrainConfig",
    "backward", "finite_diff_grad", "forward_loss", "train", "VerifierConfig",
    "contextual_map", "verify_contextual_mapping", "__version__",
]
