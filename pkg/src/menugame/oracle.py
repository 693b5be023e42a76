"""Ground-truth engine: exhaustive enumeration of every ordered menu with
per-menu optimal prices.

Deliberately independent of the DP solver and the cascade evaluators it
audits: prices come from the oracle's own backward recursion (closed form
under the exponential model, cross-checked against a fine price grid), and
menu values and seller utilities are recomputed by direct forward summation
over positions.
"""
from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.optimize import minimize_scalar

from .model import MarketInstance, PricedMenu, as_profile, tied

MAX_ORACLE_SELLERS = 8

# Fine-grid resolution (as a fraction of p_max) used to cross-check the
# closed-form stage prices.
GRID_FRACTION = 1e-5


class OracleSizeError(ValueError):
    pass


class OracleSelfCheckError(AssertionError):
    """The fine price grid found a better stage value than the closed form."""


def _stage_objective(instance: MarketInstance, a: int, delta_a: float, cont: float):
    gamma = instance.gamma

    def objective(p):
        b = instance.beta(a, p)
        return delta_a * b * p + gamma * (1.0 - b) * cont

    return objective


def _stage_price(
    instance: MarketInstance, a: int, delta_a: float, cont: float, cross_check: bool
) -> tuple[float, float]:
    """Price and value for one menu position given the suffix value `cont`."""
    objective = _stage_objective(instance, a, delta_a, cont)
    p_max = instance.p_max
    if delta_a <= 0.0:
        return p_max, float(objective(p_max))
    if instance.is_exponential:
        alpha = instance.alpha[a]
        p_star = min(max(1.0 / alpha + instance.gamma * cont / delta_a, 0.0), p_max)
        value = float(objective(p_star))
        if cross_check:
            grid = np.linspace(0.0, p_max, int(round(1.0 / GRID_FRACTION)) + 1)
            best_grid = float(np.max(objective(grid)))
            if best_grid > value + 1e-9 * max(1.0, abs(value)):
                raise OracleSelfCheckError(
                    f"grid value {best_grid} beats closed form {value} for seller {a}"
                )
        return p_star, value
    grid = np.linspace(0.0, p_max, 100001)
    vals = np.array([objective(p) for p in grid])
    k = int(np.argmax(vals))
    res = minimize_scalar(
        lambda p: -objective(p),
        bounds=(grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]),
        method="bounded",
        options={"xatol": 1e-10},
    )
    cands = [(float(res.x), float(objective(float(res.x)))), (float(grid[k]), float(vals[k]))]
    return max(cands, key=lambda pv: pv[1])


def _menu_prices(instance, delta, menu, cross_check) -> tuple[list[float], float]:
    value = 0.0
    prices = [0.0] * len(menu)
    for k in range(len(menu) - 1, -1, -1):
        a = menu[k]
        cont = value if k < len(menu) - 1 else 0.0
        prices[k], value = _stage_price(instance, a, delta[a], cont, cross_check)
    return prices, value


def _forward_revenue(instance, delta, menu, prices) -> float:
    reach, total = 1.0, 0.0
    for a, p in zip(menu, prices):
        b = float(instance.beta(a, p))
        total += delta[a] * b * p * reach
        reach *= (1.0 - b) * instance.gamma
    return total


def oracle_optimum(
    instance: MarketInstance, delta, cross_check: bool = True
) -> tuple[float, tuple[PricedMenu, ...]]:
    """Global optimum over all ordered menus with per-menu optimal prices.

    Returns the best revenue and every priced menu within the shared tie
    tolerance of it.  Guarded to small seller counts: the enumeration visits
    N!/(N-M)! menus and exists for correctness, not performance.
    """
    n, m = instance.n_sellers, instance.menu_size
    if n > MAX_ORACLE_SELLERS:
        raise OracleSizeError(
            f"oracle enumeration is limited to N <= {MAX_ORACLE_SELLERS} sellers "
            f"(got N = {n}; the menu count N!/(N-M)! grows too fast)"
        )
    delta = as_profile(delta, n)
    scored: list[tuple[float, PricedMenu]] = []
    for menu in permutations(range(n), m):
        prices, value = _menu_prices(instance, delta, menu, cross_check)
        forward = _forward_revenue(instance, delta, menu, prices)
        # Backward and forward evaluations are algebraically identical.
        if abs(forward - value) > 1e-9 * max(1.0, abs(value)):
            raise OracleSelfCheckError(
                f"menu {menu}: backward value {value} != forward value {forward}"
            )
        scored.append((value, PricedMenu(menu, tuple(prices))))
    best = max(v for v, _ in scored)
    winners = tuple(pm for v, pm in scored if tied(v, best))
    return best, winners


def oracle_seller_utilities(
    instance: MarketInstance, delta, cross_check: bool = True
) -> np.ndarray:
    """Seller utilities under the uniform mixture over all tied optimal
    menus (fairness surrogate), computed by the oracle's own forward pass."""
    delta = as_profile(delta, instance.n_sellers)
    _, winners = oracle_optimum(instance, delta, cross_check)
    util = np.zeros(instance.n_sellers)
    for pm in winners:
        reach = 1.0
        for a, p in zip(pm.menu, pm.prices):
            b = float(instance.beta(a, p))
            util[a] += ((1.0 - delta[a]) * p - instance.cost[a]) * b * reach
            reach *= (1.0 - b) * instance.gamma
    return util / len(winners)
