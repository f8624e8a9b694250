"""motifdp: sequence modeling by learned self-alignment.

A neural dynamic program fills a tensor of learned, vector-valued edit
distances between each suffix of a sequence and its own past, and forecasts
the next symbol by analogy with the continuations of well-aligned earlier
positions. Exact reference DPs serve as oracles, and an edit tree with
priority pruning makes the otherwise cubic forward pass scale.
"""

from .autodiff import Tape, Tensor
from .modules import ModelConfig, ParamStore, init_params
from .model import forward_probs, sequence_nll
from .training import TrainConfig, evaluate_params, sweep, train

__all__ = [
    "Tape",
    "Tensor",
    "ModelConfig",
    "ParamStore",
    "init_params",
    "forward_probs",
    "sequence_nll",
    "TrainConfig",
    "evaluate_params",
    "sweep",
    "train",
]

__version__ = "0.1.0"
