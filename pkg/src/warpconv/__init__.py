"""Equivariant convolutions over matrix Lie groups.

Library layout:

- :mod:`warpconv.groups` — group/algebra arithmetic and the Haar density
- :mod:`warpconv.haar` — Metropolis sampling of Haar measure, Gaussian pools
- :mod:`warpconv.autodiff` — reverse-mode tape over dense float64 tensors
- :mod:`warpconv.layers` — lifting / group convolutions, residual blocks, head
- :mod:`warpconv.data` — IDX ingest, image warping, warped dataset files
- :mod:`warpconv.cli` — the ``warpconv`` experiment command line
"""

from .groups import (
    AFFINE,
    HOMOGRAPHY,
    SCALING_ONLY,
    TRANSLATION_ONLY,
    GroupElement,
    GroupSpec,
    act_on_plane,
    action_jacobian_det,
    ad_matrix,
    dexp_series,
    exp_map,
    from_matrix,
    get_group,
    haar_density,
    identity,
    include_aff_in_hom,
    inverse,
    log_map,
    multiply,
    to_matrix,
)

__version__ = "0.1.0"
