"""Gramian interaction measures, IM rescaling and control-structure selection."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .interaction import InteractionMatrix, Measure, Scaling, build_im, rga
from .lti import RationalTF, StateSpaceModel, TransferMatrix, dc_gain
from .pairing import PairingDecision, max_assignment, pair_with_ni, ranked_assignments, sparse_structure
from .scaling import apply_scaling, sinkhorn_knopp

__all__ = [
    "BACKEND", "InteractionMatrix", "Measure", "Scaling", "build_im", "rga",
    "RationalTF", "StateSpaceModel", "TransferMatrix", "dc_gain",
    "PairingDecision", "max_assignment", "pair_with_ni", "ranked_assignments", "sparse_structure",
    "apply_scaling", "sinkhorn_knopp",
]
