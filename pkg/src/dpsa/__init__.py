"""Distributed principal subspace analysis over server-less node networks.

Estimators follow the scikit-learn fit/transform convention; the
supporting modules provide synthetic data with controlled eigengaps,
network topologies with doubly stochastic consensus weights, a
bulk-synchronous consensus engine with exact message accounting, and a
config-driven experiment runner (see the ``dpsa`` command).
"""

from .consensus import (
    AffineCappedSchedule,
    ConsensusOutcome,
    FixedSchedule,
    consensus_error_bound_check,
    consensus_sum,
    parse_schedule,
    schedule_eval,
)
from .datagen import (
    PartitionedDataset,
    SpectrumSpec,
    center_columns,
    load_binary,
    load_csv,
    make_covariance,
    partition,
    sample_gaussian,
    save_binary,
    save_csv,
)
from .engine import InProcessEngine, SocketEngine, StragglerSpec
from .estimators import (
    AdaptiveDistributedOrthogonalIteration,
    ConvergenceDiagnostics,
    DistributedOrthogonalIteration,
    EstimatorState,
    FeatureDistributedOrthogonalIteration,
    OrthogonalIteration,
    SequentialDistributedPowerMethod,
    SequentialPowerMethod,
    convergence_diagnostics,
    distributed_qr,
)
from .linalg import (
    cholesky,
    projection_distance,
    qr_factor,
    random_orthonormal,
    spectral_norm,
    subspace_error,
    sym_eig,
)
from .netgraph import (
    Topology,
    WeightMatrix,
    gen_complete,
    gen_erdos_renyi,
    gen_ring,
    gen_star,
    load_edge_list,
    metropolis_weights,
    mixing_time,
    save_edge_list,
    single_node,
    slem,
)
from .simharness import p2p_expected, run_experiment, socket_transport_roundtrip
from .trace import RunTrace, TraceRow

__version__ = "0.1.0"

__all__ = [
    "AdaptiveDistributedOrthogonalIteration",
    "AffineCappedSchedule",
    "ConsensusOutcome",
    "ConvergenceDiagnostics",
    "DistributedOrthogonalIteration",
    "EstimatorState",
    "FeatureDistributedOrthogonalIteration",
    "FixedSchedule",
    "InProcessEngine",
    "OrthogonalIteration",
    "PartitionedDataset",
    "RunTrace",
    "SequentialDistributedPowerMethod",
    "SequentialPowerMethod",
    "SocketEngine",
    "SpectrumSpec",
    "StragglerSpec",
    "Topology",
    "TraceRow",
    "WeightMatrix",
    "center_columns",
    "cholesky",
    "consensus_error_bound_check",
    "consensus_sum",
    "convergence_diagnostics",
    "distributed_qr",
    "gen_complete",
    "gen_erdos_renyi",
    "gen_ring",
    "gen_star",
    "load_binary",
    "load_csv",
    "load_edge_list",
    "make_covariance",
    "metropolis_weights",
    "mixing_time",
    "p2p_expected",
    "parse_schedule",
    "partition",
    "projection_distance",
    "qr_factor",
    "random_orthonormal",
    "run_experiment",
    "sample_gaussian",
    "save_binary",
    "save_csv",
    "save_edge_list",
    "schedule_eval",
    "single_node",
    "slem",
    "socket_transport_roundtrip",
    "spectral_norm",
    "subspace_error",
    "sym_eig",
]
