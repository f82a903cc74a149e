"""Temporal trade networks and dynamic stochastic blockmodeling.

Pipeline: ingest bilateral flow tables, build normalized thresholded
directed networks (exports / imports / net exports), fit a dynamic
blockmodel with Markov-chain memberships by variational EM, and read the
fitted clusters as core / semi-periphery / periphery tiers.
"""

__version__ = "0.1.0"

from .ingest import (
    CodeMap,
    FlowMatrix,
    FlowRecord,
    FlowTable,
    IngestError,
    IngestFormat,
    harmonize_countries,
    load_code_map,
    load_flow_table,
    yearly_flow_matrix,
)
from .netbuild import (
    TemporalNetwork,
    WeightedNet,
    build_networks,
    net_exports,
    normalize_rows,
    threshold,
)
from .sbm import (
    BlockModel,
    FitResult,
    VariationalState,
    e_step,
    elbo,
    emission_logprob,
    fit,
    forward_backward,
    icl,
    init_partition,
    m_step,
    sweep_q,
    transform_weight,
)
from .metrics import (
    TieCensus,
    concentration_index,
    country_deviation,
    minor_major_ratio,
    tie_census,
    world_average,
)
from .tiers import (
    ClusterRanking,
    TierAssignment,
    TierSpec,
    assign_tiers,
    rank_clusters,
    trajectory,
    transition_report,
)

__all__ = [
    "__version__",
    "BlockModel",
    "ClusterRanking",
    "CodeMap",
    "FitResult",
    "FlowMatrix",
    "FlowRecord",
    "FlowTable",
    "IngestError",
    "IngestFormat",
    "TemporalNetwork",
    "TieCensus",
    "TierAssignment",
    "TierSpec",
    "VariationalState",
    "WeightedNet",
    "assign_tiers",
    "build_networks",
    "concentration_index",
    "country_deviation",
    "e_step",
    "elbo",
    "emission_logprob",
    "fit",
    "forward_backward",
    "harmonize_countries",
    "icl",
    "init_partition",
    "load_code_map",
    "load_flow_table",
    "m_step",
    "minor_major_ratio",
    "net_exports",
    "normalize_rows",
    "rank_clusters",
    "sweep_q",
    "threshold",
    "tie_census",
    "trajectory",
    "transform_weight",
    "transition_report",
    "world_average",
    "yearly_flow_matrix",
]
