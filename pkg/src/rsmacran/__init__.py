"""Resilient, mixed-criticality-aware RSMA resource management for C-RAN."""

__version__ = "0.1.0"

from .errors import ConfigurationError, ModelError, SolverError, UsageError
from .model import (ChannelState, DemandProfile, Topology, apply_outage,
                    build_demand, generate_channels, generate_topology)
from .rsma import (Beamformers, Clustering, DecodingStructure, RateAllocation,
                   achievable_rates, build_decoding_structure, fronthaul_usage,
                   power_usage, sinr_common, sinr_private)
from .metrics import (ResilienceReport, ResilienceWeights, absorption,
                      adaption, mse_gap, recovery, resilience)
from .clustering import GapInstance, build_gap, cluster_and_structure, solve_gap
from .optimizer import (SolverState, build_subproblem, init_beamformers,
                        rate_gap_minimization, solve_subproblem, update_beta,
                        update_chi)
from .resilience import (EventTrace, Network, detect_outage, initial_solve,
                         mech1_rate_adaption, mech2_beamformer_adaption,
                         mech3_cluster_adaption, mech4_comprehensive,
                         run_event_loop)
from .harness import Scenario, emit_plot_data, run_sweep
