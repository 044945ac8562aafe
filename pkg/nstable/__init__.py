"""
nstable - random-stable distributions and PGF composition semigroups

Series algebra for probability generating functions, strictly stable
exponents and the closed-form random-stable laws, a laboratory for
Laplace transforms and their semigroups of scales, and Monte Carlo
branching engines that check stability and limit theorems.
"""

__version__ = "1.0.0"

from .config import ExperimentConfig
from .runner import run

__all__ = ["ExperimentConfig", "run", "__version__"]
