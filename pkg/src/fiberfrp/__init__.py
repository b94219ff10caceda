"""Single-span dual-polarization fiber modeling toolkit.

Simulates Manakov propagation with the split-step Fourier method,
evaluates first-order perturbation kernels analytically, optimizes them
from transmission data with normalized batch gradient descent, and
scores model accuracy with SNR, radii/phase-difference, and relative
error metrics.
"""

from .signal import (
    Constellation,
    DualPolSymbolSeq,
    LinkPower,
    PulseShape,
    SampledField,
    make_constellation,
    modulate,
    rrc_taps,
)
from .ssfm import AseConfig, FiberParams, add_ase, cdc, propagate, receive
from .kernels import IntegrationGrid, KernelTensor, compute_tensor, load_tensor, save_tensor
from .frp import TripletBatch, conditional_mean_theorem1, predict, predict_batch, triplets
from .nbgd import OptimizerConfig, OptimizerState
from .metrics import (
    EPSILON_PRECISE,
    conditional_stats,
    delta_phi,
    delta_r,
    relative_error,
    snr,
)

__version__ = "0.1.0"
