"""Power-splitting SWIPT optimization for DMA-aided multiuser MISO downlinks.

Jointly optimizes digital precoders, power-splitting ratios and
Lorentzian-constrained metasurface weights by alternating semidefinite
programming, with fully-digital and unconstrained-weight baselines and a
seeded experiment harness.
"""

from dma_swipt.geometry import ArrayGeometry, channel_vector, element_gain, fraunhofer_distance
from dma_swipt.dma import DmaWeights, QosTargets, WaveguideModel, lorentzian_weight
from dma_swipt.energy import EhModel, harvested_energy, required_rf_power
from dma_swipt.lorentzian import map_weights

__all__ = [
    "ArrayGeometry",
    "DmaWeights",
    "EhModel",
    "QosTargets",
    "WaveguideModel",
    "channel_vector",
    "element_gain",
    "fraunhofer_distance",
    "harvested_energy",
    "lorentzian_weight",
    "map_weights",
    "required_rf_power",
]
