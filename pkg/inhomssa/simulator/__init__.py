"""
inhomssa simulator - networks, exact and tau-leap simulators, couplings and estimators
"""
from .network import ReactionNetwork, ReactionChannel, EnvironmentModel, total_propensity, certify_bound
from .propensity import BoundCertificate, mass_action_propensity
from .randomness import RandomStream, DrawCounter
from .exact_sim import simulate_extrande, simulate_hitting_time, simulate_environment
from .couplings import CoupledPair, couple_independent, couple_crn, couple_extrande_thinning, couple_stacked
from .tau_leap import simulate_tau_leap, couple_tau_leap_pair, couple_exact_tau
from .estimators import EstimatorReport, MlmcConfig, SensitivityJob, estimate_expectation, estimate_mlmc, \
    estimate_sensitivity
from .catalog import CatalogModel, get_model
from .config_manager import Config
