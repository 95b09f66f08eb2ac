"""Robust adaptive estimation of a periodic signal observed in jump-diffusion noise.

Submodules: ``signal`` (basis, Sobolev balls, test signals), ``noise`` (noise
laws and the admissible family), ``spectral`` (exact simulation of the
normalized noise coefficients), ``selection`` (shrinkage filters and penalized
selection), ``risk`` (closed-form and Monte Carlo risks, oracle and efficiency
checks), ``lowerbound`` (Bayes/van Trees lower bound) and ``cli``.
"""

from .noise import LnRule, MarkLaw, MembershipError, NoiseModel, NoisePanel, default_panel, family_membership
from .selection import WeightGrid, WeightSequence, select, weight_grid, weight_sequence
from .signal import ConfigurationError, PeriodicSignal, SobolevBall, basis_eval, make_test_signal
from .spectral import observe, simulate_path_integrals, simulate_spectral_noise

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "LnRule",
    "MarkLaw",
    "MembershipError",
    "NoiseModel",
    "NoisePanel",
    "PeriodicSignal",
    "SobolevBall",
    "WeightGrid",
    "WeightSequence",
    "basis_eval",
    "default_panel",
    "family_membership",
    "make_test_signal",
    "observe",
    "select",
    "simulate_path_integrals",
    "simulate_spectral_noise",
    "weight_grid",
    "weight_sequence",
]
