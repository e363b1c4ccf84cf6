"""Surprising bicluster-chain discovery over multi-relational data.

Entity co-occurrence matrices are modeled with tile-constrained maximum
entropy distributions (Bernoulli grids for binary data, Gaussian grids for
real-valued data). Closed biclusters mined per relation chain into paths
whose surprisingness is scored against the background model, which the
analyst updates by marking patterns as known.
"""

from .data import (
    Dataset,
    DataError,
    DomainConflictError,
    EntityDomain,
    Relation,
    Schema,
    TransactionMatrix,
    extract_relations,
    load_transactions,
    normalize,
    read_records,
)
from .explorer import (
    BiclusterChain,
    ChainScore,
    DocumentEvidence,
    EvaluationResult,
    ModelUpdateError,
    NeighborScore,
    Session,
)
from .mining import Bicluster, ClosedBiclusterMiner, jaccard, mine_closed_biclusters
from .models import (
    BinaryMaxEnt,
    CoverageError,
    DegenerateTargetError,
    InconsistentTilesError,
    RealMaxEnt,
    dual_gradient,
    dual_objective,
    solve_scaling_factor,
)
from .scoring import (
    BackgroundTiles,
    PatternTiles,
    ScoringError,
    bernoulli_kl,
    bicluster_to_tiles,
    build_background,
    chain_to_tiles,
    gaussian_kl,
    global_score,
    local_score,
)
from .tiles import Tile, tile_frequency, tile_stats

__version__ = "0.1.0"
