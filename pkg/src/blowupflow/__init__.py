"""Simulation of the explosive planar SDE dZ = (Z^n + F(Z)) dt + sigma dB and
of its stochastic flow under a shared noise realization."""
from .drift import (ConeParams, DomainError, DriftOverflow, ModelParams, ParameterError, State,
                    drift_binomial, drift_polar, epsilon_of, in_cone, perturbation,
                    sine_constants, x_star_of)
from .experiments import (ExperimentConfig, MonteCarloReport, check_flow_property,
                          run_drift_check, run_montecarlo, run_onepoint_longrun,
                          wilson_interval)
from .flow import (BracketError, SegmentClassification, bisect_exploding_point, check_events,
                   flow_options, scan_segment, verify_trapping)
from .integrator import IntegratorOptions, Outcome, TrajectoryRecord, gronwall_floor, simulate
from .noise import (BrownianPath, NoiseRangeError, TabulatedPath, ZeroPath, fork_replicate,
                    running_sup_abs, sample)

__version__ = "0.1.0"
