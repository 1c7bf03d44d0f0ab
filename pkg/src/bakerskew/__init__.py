"""Skew products over generalized baker maps: a numerical laboratory.

Base dynamics are a generalized baker map on the unit square; fibres carry
increasing maps with negative Schwarzian derivative.  The package computes
bounding/middle invariant graphs, strong stable fibres, Lyapunov exponents,
classifies the pinching structure, and estimates the Hausdorff dimension of
the pinched set with transfer-operator pressure.
"""

from .baker import BakerSystem
from .fibre import ArctanFamily, FibreFamily

__version__ = "0.1.0"

__all__ = ["BakerSystem", "FibreFamily", "ArctanFamily", "__version__"]
