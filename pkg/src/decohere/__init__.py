"""Short-time decoherence of systems coupled to harmonic-oscillator baths."""

from .bath import (BathMode, CorrelationSamples, DiscreteBath, OhmicSpectralDensity, ThermalParameters,
                   UnitsContext, correlation_function, discretize_spectral_density, thermal_occupation)
from .evolution import (MomentumDensityMatrix, ReducedDensityMatrix, SGrid, coherence_visibility,
                        evolve_double_bath, evolve_single_bath, purity, symmetry_protected_evolution,
                        to_momentum_representation)
from .kernels import (AccelerationEstimate, DecoherenceFunctions, ShortTimeCoefficients, acceleration_factor,
                      asymptotic_rate, decoherence_functions, f_closed, f_phi_integral, golden_rule_rate,
                      phi_closed, short_time_coefficients)
from .oracle import (FockBathConfig, OracleResult, convergence_report, double_bath_fock_propagate,
                     fock_propagate, wigner_mc_average)

__version__ = "0.1.0"
