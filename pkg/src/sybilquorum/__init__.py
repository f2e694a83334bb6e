"""Stake-weighted Sybil inference feeding a threshold federated Byzantine agreement system."""
from .attack import AttackOutcome, AttackParams, benign_preset, byzantine_preset, inject_attack
from .fbas import (
    CardinalityBound,
    DSet,
    Fbas,
    build_fbas,
    check_fbas,
    delete_nodes,
    determine_dset,
    determine_safety,
    is_quorum,
    min_slice_cardinality,
)
from .graph import DirectedGraph, k_core_prune, link_count, load_edge_list, subsample_nodes
from .inference import (
    CutoffParams,
    ScoreMap,
    WalkDistribution,
    WalkGraph,
    honest_set,
    honesty_scores,
    infer_honest_sets,
    select_cutoff,
    transition_probability,
    walk_distribution,
)
from .ledger import LinkStatement, SecurityState, StatementRejected, apply_statement, to_walk_graph
from .oracle import brute_force_min_quorum, brute_force_quorum_intersection

__version__ = "0.1.0"
