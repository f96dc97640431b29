"""Minimal subspace segmentation.

Rank-restricted self-expressive representations solved on a Grassmann-type
manifold (``mss_mcg``), with alternating (``mss_ao``), hybrid (``mss_ho``) and
noise-tolerant ADMM (``mss_ro``) drivers, plus exact oracles for the
underlying segmentation theory and the evaluation metrics.
"""

from .ao import AoParams, mss_ao
from .dual import subspace_correction
from .ho import HoParams, mss_ho
from .mcg import McgParams, mss_mcg
from .metrics import metric_report
from .numerics import thin_svd
from .representation import lrr
from .ro import RoParams, mss_ro
from .synthgen import SyntheticSpec, generate
from .theory import MssPriors, Partition

__all__ = [
    "AoParams", "HoParams", "McgParams", "MssPriors", "Partition", "RoParams",
    "SyntheticSpec", "generate", "lrr", "metric_report", "mss_ao", "mss_ho",
    "mss_mcg", "mss_ro", "subspace_correction", "thin_svd",
]
__version__ = "0.1.0"
