"""Whittle-index user association for dense mmWave networks."""
from .errors import (DegenerateIndifferenceError, InvalidArgumentError,
                     MissingInputError, NonConvergenceError,
                     NumericalFailureError, StructuralViolationError,
                     WhittleAssocError)
from .model import (MbsParams, SystemConfig, TransitionKernel, check_stability,
                    departure_pmf, make_config, normalize_rates,
                    transition_kernel, transition_row, uniform_arrival_pmf)
from .chain import (ThresholdPolicy, build_dtmc, passive_mass,
                    policy_stationary, stationary_distribution)
from .mdp import (OracleConfig, ValueSolution, average_cost,
                  exhaustive_threshold, finite_horizon_discounted,
                  optimal_policy_rvi, solve_relative_values)
from .whittle import (IndexTable, WhittleSolverConfig, build_index_tables,
                      direct_index, index_table, lambda_iteration)
from .policies import ALL_POLICIES, NetworkSnapshot, PolicyKind, associate, score
from .sim import (EpisodeRecord, Metrics, compute_metrics, jfi, run_episode,
                  run_experiment)
from .presets import PRESETS, get_preset

__version__ = "0.1.0"
