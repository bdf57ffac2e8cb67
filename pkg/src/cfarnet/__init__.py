"""Learned detectors for composite hypothesis testing with a CFAR penalty.

Subpackages cover the synthetic data model, the kernel two-sample distance
used as the penalty, classical likelihood-ratio baselines, the small scoring
network with exact gradients, the training loops, Monte Carlo evaluation,
and a CLI that ties them together.
"""

from cfarnet.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
