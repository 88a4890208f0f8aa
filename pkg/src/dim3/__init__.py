"""Dynamic infinite mixed-membership stochastic blockmodels.

Two dynamic models share one nonparametric prior over communities: MTV
(membership vectors drift through the previous step's role counts) and MTI
(each node's role sequence is a sticky Markov chain). Fixed-K versions of
both serve as baselines. Inference uses collapsed Gibbs or slice sampling.
"""
from ._backend import BACKEND
from .analysis import (
    ChainTrace,
    MembershipAccumulator,
    align_communities,
    geweke_z,
    iat,
    l2_compat,
    l2_membership,
    loglik_summary,
    psrf,
)
from .enumerate import enumerate_exact
from .generator import (
    DatasetBundle,
    GroundTruth,
    fixed_truth,
    generate_fixed,
    generate_mti,
    generate_mtv,
    load_dataset,
    sampson_like,
    save_dataset,
)
from .gibbs import (
    SamplerState,
    finite_state,
    finite_sweep,
    gibbs_sweep_mti,
    gibbs_sweep_mtv,
    init_state,
    sweep,
)
from .hyper import HyperPriors
from .model import CompatibilityMatrix, GlobalWeights, LabelState, RelationTensor
from .slice import slice_sweep_mtv

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChainTrace",
    "CompatibilityMatrix",
    "DatasetBundle",
    "GlobalWeights",
    "GroundTruth",
    "HyperPriors",
    "LabelState",
    "MembershipAccumulator",
    "RelationTensor",
    "SamplerState",
    "align_communities",
    "enumerate_exact",
    "finite_state",
    "finite_sweep",
    "fixed_truth",
    "generate_fixed",
    "generate_mti",
    "generate_mtv",
    "geweke_z",
    "gibbs_sweep_mti",
    "gibbs_sweep_mtv",
    "iat",
    "init_state",
    "l2_compat",
    "l2_membership",
    "load_dataset",
    "loglik_summary",
    "psrf",
    "sampson_like",
    "save_dataset",
    "slice_sweep_mtv",
    "sweep",
]
