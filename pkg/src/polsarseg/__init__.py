"""PolSAR scattering-mechanism rasters and prompt-fusion reference kernels.

Stages: Pauli/coherency/SPAN (:mod:`polsar`), closed-form eigen features
(:mod:`eigen`), Wishart clustering (:mod:`cluster`), class rasters
(:mod:`mvd`), tiling and splits (:mod:`dataset`), the fusion kernel
(:mod:`fusion`) and segmentation scores (:mod:`metrics`).
"""

__version__ = "0.1.0"
