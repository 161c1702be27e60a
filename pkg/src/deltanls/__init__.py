"""Spectral simulator for the defocusing NLS with a repulsive delta potential."""

from .grid import (
    FourierField, GridMismatchError, GridSpec, WaveField, boundary_mass, derivative, field_from_json,
    field_to_json, form_norm_H, from_fourier, h1_norm, inner, l2_norm, load_field,
    lp_norm, make_grid, reflect, save_field, sup_norm, to_fourier, translate, wavefield,
)
from .propagators import (
    DeltaParams, PropagatorMethod, SpectralPropagator, SupportError, cn_propagate,
    delta_propagate, delta_propagate_left, exp_kernel_convolve, free_propagate,
    linear_propagate, spectral_propagate, spectral_propagator,
)
from .solver import (
    EvolutionAborted, NLSParams, StrichartzExponents, Trajectory, energy, energy_drift_ratio,
    evolve, mass, nonlinear_phase_step, perturbation_probe, strang_step, strichartz_exponents,
)
from .diagnostics import (
    band_split, dispersion_decay_fit, make_weight, rigidity_lower_bound, strichartz_spacetime_norm,
    translation_agreement, virial_refinement, virial_series,
)
from .scattering import (
    ScatteringReport, cauchy_defect, dyadic_cauchy_defects, extract_scattering_state,
    inverse_linear_pullback, wave_operator_probe,
)
from .profiles import (
    Decomposition, ProfileTerm, SyntheticFamily, cross_interaction_norm, elementary_ratio,
    greedy_extract, orthogonality_check, pythagorean_defects, splitting_defect, synth_family,
)

__version__ = "0.1.0"
