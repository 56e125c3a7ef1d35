"""Noise-induced equalization toolkit for noisy quantum neural networks.

Density-matrix simulation with Kraus noise, quantum Fisher information
matrices, the equalization-based estimate of the optimal noise level,
training under noise and a noise-dependent generalization bound term.
"""

__version__ = "0.1.0"

from .circuits import NOISELESS, CircuitSpec, Gate, NoiseSetting, build_circuit, build_hea, build_ising_qnn, evaluate, predict, value_and_grad
from .genbound import BoundInputs, bound_term_B, full_bound, scan_bound
from .nie import SpectrumScan, detect_R, estimate_p_star, importance_ratio
from .noise import KrausChannel, apply_channel, make_channel
from .qfim import QfimResult, compute_qfim, effective_dimension, log_determinant, qfim_mixed, qfim_pure
from .train import Dataset, TrainConfig, gen_sinusoidal, train_run

__all__ = [
    "__version__", "CircuitSpec", "Gate", "NoiseSetting", "NOISELESS", "build_circuit", "build_hea",
    "build_ising_qnn", "evaluate", "predict", "value_and_grad", "KrausChannel", "make_channel", "apply_channel",
    "QfimResult", "compute_qfim", "qfim_pure", "qfim_mixed", "effective_dimension", "log_determinant",
    "SpectrumScan", "importance_ratio", "detect_R", "estimate_p_star", "BoundInputs", "bound_term_B",
    "full_bound", "scan_bound", "Dataset", "TrainConfig", "gen_sinusoidal", "train_run",
]
