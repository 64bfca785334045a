"""Spiking approximations of max pooling: MJOP and AVAM nets, plus the
simulation, conversion and tuning tools around them."""

__version__ = "0.1.0"

from .avam import AvamNet, Ensemble2, PairMaxNet, build_avam_tree, pair_max, run_avam_net
from .errors import (
    BundleError,
    EmptyDistributionError,
    InfeasibleMappingError,
    InvalidStateError,
    InvalidStructureError,
    SpikePoolError,
)
from .heuristics import IsiDistribution, SweepConfig, SweepResult, collect_isi, evaluate_sweep
from .kernels import BACKEND
from .mjop import Compartment, Forward, JoinOp, McTree, MjopNet, mjop_tree_size, run_mjop_net
from .network import (
    LayerGraph,
    Linear,
    Output,
    Pool,
    WeightBundle,
    load_bundle,
    rate_forward,
    save_bundle,
    spiking_forward,
)
from .pooling import (
    CoreMap,
    Layout,
    PoolMethod,
    PoolParams,
    PoolSpec,
    TensorShape,
    extract_windows,
    plan_core_map,
    pool_layer,
)
from .sim import IfNeuron, SynapseFilter, TimeBase, filter_spikes, periodic_trains
