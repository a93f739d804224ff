"""Zeta-regularized determinants and analytic torsion of flat mapping tori."""
from .determinants import (
    HeatCoefficients,
    c0_coefficient,
    circle_det_massive,
    heat_coefficients,
    klein_bottle_det,
    mapping_torus_det_modified,
    mapping_torus_det_shifted,
    product_with_circle_det,
    rect_torus_det,
    t2_phi_action_multiplicities,
    t2_phi_det,
    zeta_zero_shifted,
)
from .dtn_gluing import BoundarySolution, DtnBlock, boundary_solution, dtn_block, dtn_zero_mode
from .fredholm import (
    DetResult,
    TruncationError,
    TruncationPolicy,
    finite_block_logdet,
    fredholm_correction,
    tail_bound,
)
from .spectral_model import (
    Circle,
    EigenBlock,
    HarmonicActionSet,
    IsometrySpec,
    MappingTorusSpec,
    RectTorus,
    SpectrumStream,
    circle_rotation_torus,
    circle_spectrum,
    fixed_dims,
    harmonic_actions,
    klein_bottle,
    product,
    t2_phi,
    tilde_spectrum,
    torus_spectrum,
)
from .torsion import (
    LefschetzData,
    analytic_torsion,
    lefschetz_number,
    lefschetz_zeta_log,
    torsion_from_definition,
    witten_torsion,
    witten_torsion_assembled,
)

__version__ = "0.1.0"
