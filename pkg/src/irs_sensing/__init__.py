"""Simulation and estimation toolkit for surface-assisted NLOS sensing.

A reflecting surface relays pulsed multicarrier illumination around a
blocked line of sight; echoes form a pulse x antenna x subcarrier tensor
whose structured low-rank factorization yields each target's direction,
Doppler shift, and delay.  The package covers scene synthesis, tensor
factorization, two-phase ambiguity resolution, variance lower bounds, and
a Monte Carlo benchmarking harness.
"""
from .config import (SPEED_OF_LIGHT, ArrayConfig, FullConfig, SceneConfig,
                     TargetConfig, WaveformConfig, default_config,
                     load_config, with_overrides)
from .cpd import (FactorTriple, UniquenessResult, check_uniqueness,
                  cp_decompose, cp_reconstruct, flat_index, khatri_rao,
                  reconstruction_error, refold, unfold)
from .crb import (CrbBounds, FactorDerivatives, FimMatrix, compute_crb,
                  compute_fim, factor_derivatives, log_likelihood,
                  mc_score_covariance, noise_cov_map, score, score_fd_check)
from .errors import (AmbiguousAlignment, ConfigError, DegenerateProfilePair,
                     DivisionBlowup, EstimationError, NoFeasibleGrid,
                     RankOneChannel, SensingError, SingularFim,
                     UniquenessError, UnwrapInfeasible)
from .estimation import (AlignedFactors, TargetEstimate, align_columns,
                         compute_gamma_statistics, estimate_delay,
                         estimate_doa_multirank, estimate_doppler,
                         estimate_targets, gamma_ratio_curve, resolve_doa,
                         write_estimates_csv)
from .experiments import (ExperimentSpec, ResultRow, build_spec, emit_results,
                          run_experiment)
from .scene import (ChannelMatrix, PhaseProfile, SceneTruth, SensingLimits,
                    TargetTruth, build_los_channel, build_rician_channel,
                    derive_target_truth, design_beamformers,
                    design_phase_profiles, sensing_limits, steering_vector,
                    validate_scene)
from .synthesis import (EchoTensor, GroundTruthFactors, apply_noise,
                        build_factor_matrices, dump_tensor, load_tensor,
                        oracle_prediction, synthesize_echo_tensor,
                        time_domain_oracle)

__version__ = "1.0.0"
