"""Gabor frames, twisted convolution algebras and their projections."""

from .errors import (
    GridMismatch,
    InsufficientSupport,
    LatticeMismatch,
    NctGaborError,
    NoConvergence,
    NotAFrame,
    NotInvertible,
    NotSelfAdjoint,
    QuadratureFailure,
    RadiusTooLarge,
    SingularBasis,
    WrongSide,
)
from .gabor_core import (
    AtomExpansion,
    FrameReport,
    associativity_residual,
    canonical_dual,
    canonical_tight,
    figa_residual,
    frame_bounds,
    frame_operator_apply,
    inner_left,
    inner_right,
    janssen_element,
    theta_op_coeffs,
    wexler_raz_residual,
)
from .lattice import (
    Lattice2D,
    LatticePoint,
    adjoint_lattice,
    enumerate_points,
    make_lattice,
    parse_lattice,
    separable,
    symplectic_phase,
    volume,
)
from .projections import (
    DecayFit,
    ProjectionReport,
    axis_envelope,
    decay_profile,
    module_condition_residual,
    projection_from_window,
    rieffel_trace,
    tensor_projection,
    theta_sweep,
    tight_for_projection,
    verify_projection,
)
from .tf_signal import (
    GridSpec,
    SampledSignal,
    WindowSpec,
    ambiguity,
    cross_ambiguity,
    custom_window,
    fourier_transform,
    gaussian,
    parse_window,
    sample_window,
    sech,
    stft,
    tf_shift,
    twosided_exp,
)
from .twisted_algebra import (
    SpectralBounds,
    TwistedElement,
    apply_left,
    apply_right,
    cocycle,
    delta,
    involute,
    inv_sqrt,
    invert,
    l1s_norm,
    regular_rep_matrix,
    spectral_bounds,
    tconv,
    trace,
    truncate,
)

__version__ = "0.1.0"
