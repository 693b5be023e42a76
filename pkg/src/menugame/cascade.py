"""Cascade click-model evaluation: reach probabilities, platform revenue and
seller utilities for fixed priced menus and for randomized policies.

All quantities are closed-form expectations over the cascade process; nothing
here simulates individual customers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MarketInstance, PricedMenu, RandomizedPolicy, as_profile


@dataclass(frozen=True)
class UtilityReport:
    """Expected platform revenue and the per-seller expected utilities."""

    platform_revenue: float
    seller_utility: tuple[float, ...]

    def seller_array(self) -> np.ndarray:
        return np.asarray(self.seller_utility)


def reach_probabilities(instance: MarketInstance, priced_menu: PricedMenu) -> np.ndarray:
    """Probability that a customer reaches each menu position.

    Position 1 is always reached; each later position is discounted by the
    predecessor's skip-and-continue factor (1 - beta) * gamma.
    """
    menu, prices = priced_menu.menu, priced_menu.prices
    reach = np.empty(len(menu))
    cur = 1.0
    for j, (seller, price) in enumerate(zip(menu, prices)):
        reach[j] = cur
        cur *= (1.0 - float(instance.beta(seller, price))) * instance.gamma
    return reach


def platform_revenue(instance: MarketInstance, delta, priced_menu: PricedMenu) -> float:
    """Expected commission income of the platform for one fixed priced menu."""
    delta = as_profile(delta, instance.n_sellers)
    reach = reach_probabilities(instance, priced_menu)
    total = 0.0
    for j, (seller, price) in enumerate(zip(priced_menu.menu, priced_menu.prices)):
        total += price * delta[seller] * float(instance.beta(seller, price)) * reach[j]
    return total


def seller_utilities_fixed(instance: MarketInstance, delta, priced_menu: PricedMenu) -> np.ndarray:
    """Expected utility of every seller under one fixed priced menu.

    Sellers absent from the menu earn zero.  Negative margins are reported
    as-is: a seller whose commission exceeds its sustainable level genuinely
    loses money per sale.
    """
    delta = as_profile(delta, instance.n_sellers)
    reach = reach_probabilities(instance, priced_menu)
    util = np.zeros(instance.n_sellers)
    for j, (seller, price) in enumerate(zip(priced_menu.menu, priced_menu.prices)):
        margin = (1.0 - delta[seller]) * price - instance.cost[seller]
        util[seller] = margin * float(instance.beta(seller, price)) * reach[j]
    return util


def policy_evaluate(instance: MarketInstance, delta, policy: RandomizedPolicy) -> UtilityReport:
    """Probability-weighted revenue and utilities of a randomized policy."""
    revenue = 0.0
    util = np.zeros(instance.n_sellers)
    for priced_menu, prob in policy.support:
        revenue += prob * platform_revenue(instance, delta, priced_menu)
        util += prob * seller_utilities_fixed(instance, delta, priced_menu)
    return UtilityReport(revenue, tuple(util))
