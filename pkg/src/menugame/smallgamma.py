"""Closed-form machinery for the low-exploration regime: ranking indices,
tie bins, the randomized index menu, recursive menu prices and the
approximate policy that prices every item at its stand-alone optimum.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations

import numpy as np

from . import mdp
from .model import (
    E_INV,
    TIE_TOL,
    MarketInstance,
    Menu,
    PricedMenu,
    RandomizedPolicy,
    as_profile,
)


def f_star_index(instance: MarketInstance, delta) -> np.ndarray:
    """Maximum immediate platform reward per seller: max_p delta_a beta_a(p) p.

    Exponential response has the closed form delta_a / (e * alpha_a).
    """
    delta = as_profile(delta, instance.n_sellers)
    if instance.is_exponential:
        return delta * E_INV / np.asarray(instance.alpha)
    out = np.empty(instance.n_sellers)
    for a in range(instance.n_sellers):
        _, out[a] = mdp.inner_price_opt(instance, a, delta[a], 0.0)
    return out


def myopic_prices(instance: MarketInstance) -> np.ndarray:
    """Stand-alone revenue-maximizing price per seller: argmax_p beta_a(p) p.

    Commission-independent; equals 1/alpha_a under the exponential model.
    """
    if instance.is_exponential:
        return 1.0 / np.asarray(instance.alpha)
    out = np.empty(instance.n_sellers)
    for a in range(instance.n_sellers):
        out[a], _ = mdp.inner_price_opt(instance, a, 1.0, 0.0)
    return out


def h_index(instance: MarketInstance, delta) -> np.ndarray:
    """Ranking index for pre-set prices: beta p* delta / (1 - gamma (1 - beta)).

    For the exponential model this ranks sellers exactly like f_star_index at
    every gamma (the two differ by a seller-independent factor).
    """
    delta = as_profile(delta, instance.n_sellers)
    prices = myopic_prices(instance)
    beta = np.array([float(instance.beta(a, prices[a])) for a in range(instance.n_sellers)])
    return beta * prices * delta / (1.0 - instance.gamma * (1.0 - beta))


@dataclass(frozen=True)
class BinStructure:
    """f*-order statistics: maximal tied groups in descending index order.

    offsets[l] counts the sellers placed before bin l; sizes[l] is the bin
    cardinality.  Bins partition the full seller set.
    """

    bins: tuple[tuple[int, ...], ...]
    offsets: tuple[int, ...]
    sizes: tuple[int, ...]

    def bin_of(self, seller: int) -> int:
        for l, members in enumerate(self.bins):
            if seller in members:
                return l
        raise KeyError(seller)


def _group_desc(values: np.ndarray) -> list[list[int]]:
    """Group indices by value, descending, merging adjacent near-ties."""
    order = sorted(range(len(values)), key=lambda a: (-values[a], a))
    groups: list[list[int]] = []
    for a in order:
        if groups:
            rep = values[groups[-1][0]]
            if values[a] >= rep - TIE_TOL * max(abs(rep), 1e-12):
                groups[-1].append(a)
                continue
        groups.append([a])
    return groups


def bin_structure(instance: MarketInstance, delta) -> BinStructure:
    groups = _group_desc(f_star_index(instance, delta))
    offsets, sizes, total = [], [], 0
    for g in groups:
        offsets.append(total)
        sizes.append(len(g))
        total += len(g)
    return BinStructure(tuple(tuple(g) for g in groups), tuple(offsets), tuple(sizes))


def index_menu_distribution(instance: MarketInstance, delta) -> tuple[tuple[Menu, float], ...]:
    """Distribution over menus induced by f*-ranking with uniform tie placement.

    Bins are laid down in index order; a bin straddling the menu boundary
    contributes a uniform draw over the ordered injections of its members
    into the remaining slots.  Probabilities are exact rationals reduced to
    doubles at the end.
    """
    m = instance.menu_size
    bins = bin_structure(instance, delta)
    partial: list[tuple[tuple[int, ...], Fraction]] = [((), Fraction(1))]
    for members, offset in zip(bins.bins, bins.offsets):
        if offset >= m:
            break
        slots = min(len(members), m - offset)
        arrangements = list(permutations(sorted(members), slots))
        weight = Fraction(1, len(arrangements))
        partial = [
            (prefix + arr, prob * weight)
            for prefix, prob in partial
            for arr in arrangements
        ]
    return tuple((menu, float(prob)) for menu, prob in sorted(partial))


def f_star_menu(instance: MarketInstance, delta) -> Menu:
    """The unique top-M menu in strict f*-order; rejects tied instances."""
    dist = index_menu_distribution(instance, delta)
    if len(dist) != 1:
        raise ValueError("f* values are tied; the index menu is not unique")
    return dist[0][0]


def recursive_prices(
    instance: MarketInstance, delta, menu
) -> tuple[np.ndarray, dict[int, float], float]:
    """Optimal prices for a fixed menu via the backward position recursion.

    Returns (price per position, seller-indexed price map, menu value).  The
    last position is priced myopically; earlier positions trade immediate
    commission against the continuation value of the suffix.
    """
    delta = as_profile(delta, instance.n_sellers)
    menu = tuple(int(a) for a in menu)
    m = len(menu)
    prices = np.empty(m)
    value = 0.0
    for k in range(m - 1, -1, -1):
        a = menu[k]
        cont = 0.0 if k == m - 1 else value
        prices[k], value = mdp.inner_price_opt(instance, a, delta[a], cont)
    by_seller = {a: float(prices[k]) for k, a in enumerate(menu)}
    return prices, by_seller, value


def approx_policy(instance: MarketInstance, delta) -> RandomizedPolicy:
    """Small-exploration approximate policy: index menus at myopic prices.

    Every item is priced at its stand-alone optimum (1/alpha under the
    exponential model), independent of the menu it lands in.
    """
    prices = myopic_prices(instance)
    support = tuple(
        (PricedMenu(menu, tuple(prices[a] for a in menu)), prob)
        for menu, prob in index_menu_distribution(instance, delta)
    )
    return RandomizedPolicy(support)


def gamma_bar(instance: MarketInstance, delta, tol: float = 1e-3, hi: float = 0.999) -> float:
    """Empirical exploration threshold below which the exact fair policy is
    exactly the strict f*-order menu.

    Bisection on gamma: the theory guarantees a positive threshold exists for
    strictly decreasing f* values but gives no formula.  Returns the largest
    verified gamma (up to `tol`); `hi` itself is returned when the identity
    already holds there.
    """
    target = f_star_menu(instance, delta)

    def holds(g: float) -> bool:
        pol = mdp.fair_policy(instance.with_gamma(g), delta)
        return pol.is_deterministic() and pol.support[0][0].menu == target

    lo = 0.0
    if holds(hi):
        return hi
    span = hi - lo
    while span > tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
        span = hi - lo
    return lo
