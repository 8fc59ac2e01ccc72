"""Word usage graphs: incremental pair annotation, correlation clustering,
agreement and semantic change statistics."""

from .clustering import (
    AnnealConfig,
    Clustering,
    ConflictSet,
    cluster,
    cluster_accuracy,
    conflicts,
    loss,
    normalized_loss,
)
from .graph import (
    SCALE_LABELS,
    WUG,
    GraphError,
    Judgment,
    SenseDescription,
    Usage,
    build_usg_pairs,
    build_wug,
    canonical_pair,
    filter_zero_nodes,
    shift,
    subgraph_by_period,
)
from .metrics import (
    AgreementReport,
    ChangeScores,
    agreement_report,
    binary_change,
    change_scores,
    cluster_frequency_dist,
    disagreement_histogram,
    graded_change,
    judgment_frequencies,
    krippendorff_alpha,
    pairwise_spearman,
)
from .sampling import (
    AnnotationBatch,
    RoundState,
    SamplingConfig,
    combination_step,
    conflict_resample,
    corroboration_sample,
    disagreement_edges,
    exploration_step,
    next_round,
    round1_sample,
    word_flags,
)
from .simulation import (
    NoiseModel,
    PlantedGraph,
    RobustnessCurve,
    SimReport,
    generate_planted_graph,
    robustness_experiment,
    run_pipeline_sim,
    simulate_annotator,
)
from .storage import DataError, Project, export_graph, graph_json_bytes, ingest, load

__version__ = "0.1.0"

__all__ = [
    "AgreementReport",
    "AnnealConfig",
    "AnnotationBatch",
    "ChangeScores",
    "Clustering",
    "ConflictSet",
    "DataError",
    "GraphError",
    "Judgment",
    "NoiseModel",
    "PlantedGraph",
    "Project",
    "RobustnessCurve",
    "RoundState",
    "SCALE_LABELS",
    "SamplingConfig",
    "SenseDescription",
    "SimReport",
    "Usage",
    "WUG",
    "agreement_report",
    "binary_change",
    "build_usg_pairs",
    "build_wug",
    "canonical_pair",
    "change_scores",
    "cluster",
    "cluster_accuracy",
    "cluster_frequency_dist",
    "combination_step",
    "conflict_resample",
    "conflicts",
    "corroboration_sample",
    "disagreement_edges",
    "disagreement_histogram",
    "export_graph",
    "exploration_step",
    "filter_zero_nodes",
    "generate_planted_graph",
    "graded_change",
    "graph_json_bytes",
    "ingest",
    "judgment_frequencies",
    "krippendorff_alpha",
    "load",
    "loss",
    "next_round",
    "normalized_loss",
    "pairwise_spearman",
    "robustness_experiment",
    "round1_sample",
    "run_pipeline_sim",
    "shift",
    "simulate_annotator",
    "subgraph_by_period",
    "word_flags",
]
