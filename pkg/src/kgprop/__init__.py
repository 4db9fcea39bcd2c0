"""kgprop: Klein-Gordon propagators on non-stationary 1+1d spacetimes.

Operator assembly, time-dependent norm scales, the frozen-generator product
evolution, classical and frequency-split propagator kernels, and a
verification suite for the identities they satisfy.
"""

from .errors import (AssumptionViolation, ConfigError, KgpropError, ScenarioError,
                     WindowExceeded)
from .geometry import FieldSlice, Lattice, ScenarioModel, builtin_scenario, sample_slice
from .operators import (OperatorSet, assemble_B, assemble_H, assemble_H0, assemble_L,
                        assemble_W, estimate_appendixB_constants, fractional_power,
                        make_operator_set, ops_provider, verify_assumptions)
from .spaces import NormFamily, build_norm_family, k_delta_norm, norm
from .evolution import (EvolutionOperator, StepSchedule, UProvider, check_norm_bound,
                        compose, evolve, perturbed_evolve)
from .propagators import (FrequencyProjection, PropagatorKernel, TimeLimit, apply_G,
                          asymptotic_projection, classical_kernel, feynman_kernel,
                          freq_projection, instantaneous_kernel, solve_cauchy,
                          sweep_apply, to_G_form)
from .verification import (CheckReport, DEFAULT_SEED, check_bisolution,
                           check_charge_conservation, check_finite_speed, check_inverse,
                           check_positivity, make_rng, run_default_suite, static_oracle,
                           suite_passed)

__version__ = "0.1.0"
