"""Tile-aware pruning and permutation of MNIST autoencoders with a simulated HE cost model."""

from ._core import (
    Network,
    OpCounts,
    SimReport,
    TileShape,
    apply_permutations,
    build_autoencoder,
    build_network,
    count_zero_tiles,
    expand,
    load_checkpoint,
    memory_bytes,
    permute_inputs,
    permute_network,
    predict,
    predict_exact,
    prune,
    prune_pack,
    prune_pack_threshold,
    restore_outputs,
    run_strategy,
    save_checkpoint,
    simulate,
    synthetic_dataset,
    verify_equivalence,
)

__all__ = [
    "Network",
    "OpCounts",
    "SimReport",
    "TileShape",
    "apply_permutations",
    "build_autoencoder",
    "build_network",
    "count_zero_tiles",
    "expand",
    "load_checkpoint",
    "memory_bytes",
    "permute_inputs",
    "permute_network",
    "predict",
    "predict_exact",
    "prune",
    "prune_pack",
    "prune_pack_threshold",
    "restore_outputs",
    "run_strategy",
    "save_checkpoint",
    "simulate",
    "synthetic_dataset",
    "verify_equivalence",
]
