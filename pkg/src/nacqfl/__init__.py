"""Noise-aware clustered quantum federated learning, simulated at desk scale.

Subsystems: density-matrix simulation (:mod:`nacqfl.sim`), calibration-driven
noise models (:mod:`nacqfl.noise`), fleet clustering (:mod:`nacqfl.topology`),
noise-aware device selection (:mod:`nacqfl.selection`), partitioned quantum
neural networks (:mod:`nacqfl.dqnn`), error mitigation
(:mod:`nacqfl.mitigation`), federated training (:mod:`nacqfl.federation`),
datasets (:mod:`nacqfl.data`) and the experiment harness
(:mod:`nacqfl.presets`, :mod:`nacqfl.cli`).
"""

from .backend import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND"]
__version__ = "0.1.0"
