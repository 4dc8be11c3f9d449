"""Context-sensitive compound semantic-type identification.

Trains a small wordpiece transformer with a biaffine pair/label scorer and
maximum-voting decoder, optionally supervised by morphological-tagging and
dependency-parsing auxiliary heads, on a from-scratch reverse-mode autodiff
engine. Ships a data pipeline, trainer, evaluator, CLI, HTTP service, and an
annotation workflow.
"""

__version__ = "0.1.0"

from .autodiff import Tensor, backward
from .optim import Optimizer, ParameterStore

__all__ = ["Tensor", "backward", "Optimizer", "ParameterStore", "__version__"]
