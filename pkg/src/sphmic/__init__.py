"""Spherical microphone array processing.

Sampling (the matrix B, its conditioning and microphone placement) and
spherical-harmonics-domain beamforming, with a plane-wave simulator for
end-to-end checks.
"""
from .beamforming import (
    AxisymmetricWeights,
    BeamPattern,
    GeneralWeights,
    axisymmetric_to_general,
    beam_pattern,
    beamformer_output,
    delay_sum_weights,
    directivity_index,
    dolph_chebyshev_weights,
    load_weights,
    null_constrained_weights,
    pattern_value,
    regular_weights,
    save_weights,
    steer_weights,
)
from .harmonics import (
    Direction,
    EulerAngles,
    sh_matrix,
    sph_bessel_j,
    sph_bessel_j_deriv,
    sph_hankel_h,
    sph_hankel_h_deriv,
    sph_harmonic,
    wigner_D,
    wigner_D_matrix,
)
from .radial import (
    DualSphere,
    FreeField,
    OpenCardioid,
    OpenPressure,
    RigidSphere,
    min_abs_bn,
    optimal_dual_alpha,
    radial_bn,
)
from .sampling import (
    ArrayGeometry,
    ModalCoefficients,
    MicrophonePosition,
    RankDeficientError,
    SamplingMatrixB,
    SamplingOperator,
    build_matrix_B,
    condition_numbers,
    estimate_modal,
    jitter_directions,
    load_geometry,
    optimize_positions,
    save_geometry,
    solve_sampling_operator,
    sphere_sampling,
    white_noise_gain,
)
from .simulation import (
    PlaneWaveSource,
    Scenario,
    load_scenario,
    plane_wave_to_modal,
    run_chain,
    synthesize_pressure,
)

__version__ = "0.1.0"
