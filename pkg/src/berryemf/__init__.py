"""Berry-connection fields of spin vortices, their quantization, and the EMF they drive."""

from .emf import (FaradaySweep, FaradayTerms, MovingLoop, TimeDependentB, berry_emf_flux_rule,
                  berry_emf_line_form, berry_emf_step, berry_flux, faraday_emf_decomposed,
                  faraday_emf_extrapolated, faraday_emf_total, faraday_sweep, magnetic_flux)
from .errors import (AmbiguousEnclosure, BerryEmfError, ComputationError, DensityFloor,
                     InvalidConfig, InvalidDensity, InvalidEnsemble, InvalidGradient,
                     InvalidTemperature, QuadratureFailure, QuadratureMismatch, ScenarioTooLarge,
                     SingularEvaluation, SingularLoop, ValidationError)
from .field_core import (GridVectorField, VectorField2D, VortexConfig, berry_connection_field,
                         chi_gradient, constant_field, current_density, curl_z, velocity_field)
from .manybody import (GridWaveFunction, MixtureEnsemble, berry_connection_mb,
                       boltzmann_weights, factorization_check, mixture_connection,
                       phase_from_chi)
from .nernst import (DensitySweep, EnsembleResult, NernstResult, NernstScenario, density_sweep,
                     nernst_signal, nernst_summary, run_ensemble, run_nernst, sample_vortex_gas)
from .topology import (PolyLoop, QuantizationReport, line_integral, quadrature_winding,
                       verify_quantization, winding_number)
from .units import NATURAL, SI, UnitSystem, get_units

__version__ = "0.1.0"
