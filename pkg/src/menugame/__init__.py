"""Platform menu-and-pricing optimization with strategic seller commissions.

The package solves the platform's joint ranking-and-pricing problem exactly
(finite-horizon MDP over subset states), approximately (index policies for
low customer exploration), simulates epsilon-best-response commission
dynamics among sellers, and verifies the resulting equilibrium structures
(Nash, epsilon-Nash, and the connected equilibrium cycle) against
brute-force oracles.
"""

from .cascade import (
    UtilityReport,
    platform_revenue,
    policy_evaluate,
    reach_probabilities,
    seller_utilities_fixed,
)
from .equilibria import (
    ECBox,
    VerificationReport,
    canonical_subset_candidates,
    check_stability,
    check_unrest,
    ec_box,
    falsify_subset,
    search_external_tail,
    thresholds_eta_tilde,
    verify_eps_nash,
    verify_nash,
)
from .mdp import OptimizerSet, ValueTable, fair_policy, inner_price_opt, solve_dp
from .model import (
    CallableResponse,
    CommissionProfile,
    ExponentialResponse,
    InstanceFormatError,
    MarketInstance,
    PricedMenu,
    RandomizedPolicy,
    ResponseModel,
    eta,
    gamma_tilde,
    load_instance,
    save_instance,
)
from .oracle import oracle_optimum, oracle_seller_utilities
from .sellers import (
    BRConfig,
    BRStep,
    BRTrace,
    br_dynamics,
    epsilon_best_response,
    unified_utility,
)
from .smallgamma import (
    BinStructure,
    approx_policy,
    bin_structure,
    f_star_index,
    gamma_bar,
    h_index,
    index_menu_distribution,
    recursive_prices,
)

__all__ = [
    "BRConfig",
    "BRStep",
    "BRTrace",
    "BinStructure",
    "CallableResponse",
    "CommissionProfile",
    "ECBox",
    "ExponentialResponse",
    "InstanceFormatError",
    "MarketInstance",
    "OptimizerSet",
    "PricedMenu",
    "RandomizedPolicy",
    "ResponseModel",
    "UtilityReport",
    "ValueTable",
    "VerificationReport",
    "approx_policy",
    "bin_structure",
    "br_dynamics",
    "canonical_subset_candidates",
    "check_stability",
    "check_unrest",
    "ec_box",
    "epsilon_best_response",
    "eta",
    "f_star_index",
    "fair_policy",
    "falsify_subset",
    "gamma_bar",
    "gamma_tilde",
    "h_index",
    "index_menu_distribution",
    "inner_price_opt",
    "load_instance",
    "oracle_optimum",
    "oracle_seller_utilities",
    "platform_revenue",
    "policy_evaluate",
    "reach_probabilities",
    "recursive_prices",
    "save_instance",
    "search_external_tail",
    "seller_utilities_fixed",
    "solve_dp",
    "thresholds_eta_tilde",
    "unified_utility",
    "verify_eps_nash",
    "verify_nash",
]

__version__ = "0.1.0"
