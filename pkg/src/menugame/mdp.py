"""Exact solution of the platform's joint ranking-and-pricing problem.

The problem is a finite-horizon MDP: stage t places an item at menu position
t, the state is the set of sellers still available (plus an absorbing state
once the customer buys or leaves), and backward induction over subset states
yields the value table, the per-state optimizer sets and the fair randomized
policy that mixes uniformly over tied optimizers at every stage.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping

import numpy as np

from .model import (
    MarketInstance,
    Menu,
    PricedMenu,
    RandomizedPolicy,
    as_profile,
    tied,
)

State = frozenset


@dataclass(frozen=True)
class ValueTable:
    """DP value function v_t(x) on the reachable subset states.

    The absorbing state and the empty set carry value zero and are not
    stored.  Stage t holds states of cardinality N - t + 1.
    """

    horizon: int
    values: Mapping[tuple[int, State], float]

    def value(self, t: int, x) -> float:
        x = frozenset(x)
        if not x:
            return 0.0
        return self.values[(t, x)]

    def optimum(self) -> float:
        """v_1 at the full seller set: the platform's optimal revenue."""
        (t1_key,) = [k for k in self.values if k[0] == 1]
        return self.values[t1_key]


@dataclass(frozen=True)
class OptimizerSet:
    """Per (stage, state): the (seller, price, q-value) triples that attain
    the stage maximum within the shared tie tolerance."""

    entries: Mapping[tuple[int, State], tuple[tuple[int, float, float], ...]]

    def at(self, t: int, x) -> tuple[tuple[int, float, float], ...]:
        return self.entries[(t, frozenset(x))]


def inner_price_opt(
    instance: MarketInstance, seller: int, delta_a: float, continuation: float
) -> tuple[float, float]:
    """Best price for one seller against a fixed continuation value.

    Maximizes delta_a * beta(p) * p + gamma * (1 - beta(p)) * continuation
    over [0, p_max].  Exponential response with delta_a > 0 has the closed
    form p* = 1/alpha + gamma * continuation / delta_a; other response models
    fall back to a bracketed scalar search with xatol 1e-10.

    delta_a = 0 is degenerate (the objective rewards non-purchase): the cap
    p_max is returned with the pure-continuation value.
    """
    gamma, p_max = instance.gamma, instance.p_max
    c = continuation

    def objective(p: float) -> float:
        b = float(instance.beta(seller, p))
        return delta_a * b * p + gamma * (1.0 - b) * c

    if delta_a <= 0.0:
        return p_max, objective(p_max)

    if instance.is_exponential:
        alpha = instance.alpha[seller]
        p_star = min(max(1.0 / alpha + gamma * c / delta_a, 0.0), p_max)
        return p_star, objective(p_star)

    # Generic decreasing response: coarse bracket, then golden-section
    # refinement to absolute width 1e-10 on the price.
    grid = np.linspace(0.0, p_max, 1025)
    beta = np.asarray(instance.beta(seller, grid))
    vals = delta_a * beta * grid + gamma * (1.0 - beta) * c
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    p_star = _golden_max(objective, lo, hi, xatol=1e-10)
    candidates = [(p_star, objective(p_star)), (float(grid[k]), float(vals[k])),
                  (p_max, objective(p_max))]
    return max(candidates, key=lambda pv: pv[1])


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(fn, lo: float, hi: float, xatol: float) -> float:
    """Golden-section maximization on a unimodal bracket."""
    a, b = lo, hi
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > xatol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = fn(x1)
    return 0.5 * (a + b)


def _stage_states(n: int, t: int) -> list[State]:
    return [frozenset(c) for c in combinations(range(n), n - t + 1)]


def solve_dp(instance: MarketInstance, delta) -> tuple[ValueTable, OptimizerSet]:
    """Backward induction over the reachable subset states.

    Only cardinalities reachable from the full set at stage 1 are
    enumerated (|x| = N - t + 1), not the whole power set.
    """
    delta = as_profile(delta, instance.n_sellers)
    n, m = instance.n_sellers, instance.menu_size
    values: dict[tuple[int, State], float] = {}
    opts: dict[tuple[int, State], tuple[tuple[int, float, float], ...]] = {}

    for t in range(m, 0, -1):
        for x in _stage_states(n, t):
            per_seller = []
            for a in sorted(x):
                cont = 0.0 if t == m else values[(t + 1, x - {a})]
                price, q = inner_price_opt(instance, a, delta[a], cont)
                per_seller.append((a, price, q))
            best = max(q for _, _, q in per_seller)
            winners = tuple(e for e in per_seller if tied(e[2], best))
            values[(t, x)] = best
            opts[(t, x)] = winners
    return ValueTable(m, values), OptimizerSet(opts)


def fair_policy(
    instance: MarketInstance, delta, dp: tuple[ValueTable, OptimizerSet] | None = None
) -> RandomizedPolicy:
    """Unroll the uniform-over-optimizers decision rule into an explicit
    finite distribution over priced menus.

    Identical (menu, prices) pairs reached along different tie paths collapse
    into one support atom; their probabilities add.  Prices agree bitwise
    across paths because each comes from the same optimizer-table entry.
    """
    delta = as_profile(delta, instance.n_sellers)
    if dp is None:
        dp = solve_dp(instance, delta)
    _, opt = dp
    n, m = instance.n_sellers, instance.menu_size

    merged: dict[tuple[Menu, tuple[float, ...]], float] = {}

    def unroll(t: int, x: State, prob: float, menu: tuple[int, ...], prices: tuple[float, ...]):
        winners = opt.at(t, x)
        w = prob / len(winners)
        for a, price, _ in winners:
            menu2 = menu + (a,)
            prices2 = prices + (price,)
            if t == m:
                key = (menu2, prices2)
                merged[key] = merged.get(key, 0.0) + w
            else:
                unroll(t + 1, x - {a}, w, menu2, prices2)

    unroll(1, frozenset(range(n)), 1.0, (), ())
    support = tuple(
        (PricedMenu(menu, prices), merged[(menu, prices)])
        for menu, prices in sorted(merged)
    )
    return RandomizedPolicy(support)
