"""keynode: identify influential nodes in complex networks.

Monte Carlo cascade simulation produces per-node influence statistics;
clustering turns them into class labels; centrality embeddings feed a
classifier suite; evaluation covers hold-out, cross-network and
label-method comparisons; Shapley sampling ranks the features.
"""

from .backend import backend_name
from .centrality import (
    CENTRALITY_ORDER,
    CentralityId,
    NodeScoreMap,
    compute_all_centralities,
    compute_centrality,
)
from .diffusion import (
    CascadeOutcome,
    SimulationRecord,
    ThresholdSet,
    run_cascade,
    run_sir_gamma1,
    simulate_all,
    simulate_node,
)
from .evaluation import (
    EvalReport,
    NetworkDataset,
    TaskId,
    binning_comparison,
    build_dataset,
    cross_network_eval,
    f1_macro,
    within_network_eval,
)
from .features import (
    FEATURE_NAMES,
    FeatureMatrix,
    apply_standardizer,
    assemble_features,
    fit_standardizer,
)
from .graph import (
    Graph,
    GraphStats,
    compute_stats,
    from_edges,
    generate_synthetic,
    load_edge_list,
    reachable_set,
)
from .importance import ImportanceReport, importance_report, shapley_sample
from .labeling import (
    BinSpec,
    LabelSet,
    baseline_bins,
    fixed_bins_top_percent,
    select_k,
    smart_bins_dp_exact,
    smart_bins_kmeans,
)
from .models import ModelSpec, TrainedModel, predict, predict_proba, train

__version__ = "0.1.0"
