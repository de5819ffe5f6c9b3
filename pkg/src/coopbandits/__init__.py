"""Cooperative multi-armed bandits over communication graphs.

Running-consensus estimation, the coop-UCB / coop-UCB2 / coop-UCL policies,
spectral explore-exploit centrality, Monte Carlo regret experiments and the
associated regret bounds.
"""
from .estimation import (CentralizedReference, NetworkEstimationState, UnexploredArm,
                         centralized_reference, consensus_step, mu_hat)
from .graph import (ConsensusModel, DisconnectedGraphError, Graph, SpectrumError,
                    complete_graph, consensus_model, erdos_renyi, from_edge_list, is_connected,
                    isolated_model, laplacian, paw_graph, path_graph)
from .numerics import RandomStream, SymmetricSpectrum, eig_sym, gaussian_sample, inv_norm_cdf
from .policies import (BayesianPosterior, BayesianPrior, PolicyConfig, coop_ucb2_bonus,
                       coop_ucb_bonus, coop_ucl_posterior, coop_ucl_q, select_arm, t_dagger,
                       ucl_posterior_batch)
from .simulation import (AggregateResult, BanditEnvironment, EnvironmentDraw, ExperimentConfig,
                         RegretTrace, draw_environment, fusion_center_lower_bound, monte_carlo,
                         run_episode, theorem1_bound, theorem2_bound)

__version__ = "0.1.0"
