"""The unified seller game: closed-form commission utilities over ranking
bins, epsilon-best-response moves and the seeded best-response dynamics that
drive the oscillation experiments.

Everything here assumes the exponential response model; the closed form is
validated elsewhere against full policy evaluation of the approximate policy,
which is the unambiguous ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import E_INV, TIE_TOL, MarketInstance, as_profile, eta, gamma_tilde
from .smallgamma import bin_structure


def _position_factor(gt: float, k: int, b: int, m: int) -> float:
    """Expected reach discount for a member of a bin of size b whose first
    slot is k+1 (0-based offset k), truncated at menu length m."""
    terms = max(0, min(b, m - k))
    if terms == 0:
        return 0.0
    if gt == 0.0:
        total = 1.0
    else:
        total = (1.0 - gt**terms) / (1.0 - gt)
    return gt**k * total / b


def unified_utility(instance: MarketInstance, delta) -> np.ndarray:
    """Seller utilities under the approximate policy, in closed form.

    Sellers are binned by their ranking statistic delta/alpha; a bin whose
    slots all fall beyond the menu earns zero.  The margin factor is
    (eta_a - delta_a) / (e * alpha_a).
    """
    delta = as_profile(delta, instance.n_sellers)
    gt = gamma_tilde(instance)
    etas = eta(instance)
    alphas = np.asarray(instance.alpha)
    bins = bin_structure(instance, delta)
    util = np.zeros(instance.n_sellers)
    for members, k, b in zip(bins.bins, bins.offsets, bins.sizes):
        factor = _position_factor(gt, k, b, instance.menu_size)
        for a in members:
            util[a] = (etas[a] - delta[a]) * E_INV / alphas[a] * factor
    return util


def unified_utility_candidates(
    instance: MarketInstance, delta, seller: int, candidates
) -> np.ndarray:
    """Utility of `seller` at each candidate commission, opponents fixed.

    Vectorized over candidates: the seller's slot depends only on how many
    opponents rank strictly above it and how many tie with it, both of which
    come from searchsorted lookups against the opponents' ranking statistics.
    """
    delta = as_profile(delta, instance.n_sellers)
    cand = np.asarray(candidates, dtype=float)
    gt = gamma_tilde(instance)
    etas = eta(instance)
    alphas = np.asarray(instance.alpha)
    m = instance.menu_size

    opp = np.delete(np.arange(instance.n_sellers), seller)
    opp_stats = np.sort(np.asarray([delta[j] / alphas[j] for j in opp]))
    my_stats = cand / alphas[seller]

    slack = TIE_TOL * np.maximum(np.abs(my_stats), 1e-12)
    n_opp = len(opp_stats)
    above = n_opp - np.searchsorted(opp_stats, my_stats + slack, side="right")
    not_below = n_opp - np.searchsorted(opp_stats, my_stats - slack, side="left")
    b = not_below - above + 1

    terms = np.clip(np.minimum(b, m - above), 0, None)
    if gt == 0.0:
        geo = (terms >= 1).astype(float)
        reach = (above == 0).astype(float)
    else:
        geo = (1.0 - gt ** terms.astype(float)) / (1.0 - gt)
        reach = gt ** above.astype(float)
    margin = (etas[seller] - cand) * E_INV / alphas[seller]
    return margin * reach * geo / b


@dataclass(frozen=True)
class BRConfig:
    """Knobs of the epsilon-best-response dynamics."""

    grid_step: float = 1e-3
    undercut: float = 1e-3
    epsilon: float = 1e-4
    max_iters: int = 500
    burn_in: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.grid_step <= self.undercut:
            raise ValueError("require 0 < grid_step <= undercut")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not 0 <= self.burn_in < self.max_iters:
            raise ValueError("burn_in must be smaller than max_iters")


def candidate_commissions(
    instance: MarketInstance, delta, seller: int, grid_step: float, undercut: float
) -> np.ndarray:
    """Deviation candidates: a uniform grid on [0, 1] plus the points just
    above/below every opponent in ranking-statistic space, clipped to [0, 1].

    Matching an opponent j in the statistic delta/alpha means commission
    delta_j * alpha_i / alpha_j; for common alpha this is plain delta_j.
    """
    delta = np.asarray(delta, dtype=float)
    alphas = np.asarray(instance.alpha)
    grid = np.linspace(0.0, 1.0, round(1.0 / grid_step) + 1)
    matches = np.array(
        [delta[j] * alphas[seller] / alphas[j] for j in range(instance.n_sellers) if j != seller]
    )
    extras = np.concatenate([matches + undercut, matches - undercut])
    return np.unique(np.clip(np.concatenate([grid, extras]), 0.0, 1.0))


def epsilon_best_response(
    instance: MarketInstance, delta, seller: int, config: BRConfig
) -> float | None:
    """Best candidate commission for one seller, or None when nothing strictly
    improves on the current utility.

    The returned move is the candidate-set maximizer, hence trivially within
    epsilon of the best candidate; ties at the maximum resolve to the lowest
    commission.
    """
    delta = as_profile(delta, instance.n_sellers)
    cand = candidate_commissions(instance, delta, seller, config.grid_step, config.undercut)
    utils = unified_utility_candidates(instance, delta, seller, cand)
    current = unified_utility_candidates(instance, delta, seller, [delta[seller]])[0]
    k = int(np.argmax(utils))
    if utils[k] > current and cand[k] != delta[seller]:
        return float(cand[k])
    return None


@dataclass(frozen=True)
class BRStep:
    """One accepted move: the mover's id, the profile after the move and the
    mover's utility at the new profile."""

    iteration: int
    mover: int
    profile: tuple[float, ...]
    utility: float


@dataclass(frozen=True)
class BRTrace:
    """Full record of one dynamics run.

    `profiles` has one row per iteration (row 0 is the initial profile), so
    no-move iterations repeat the previous row; `steps` lists accepted moves
    only.  `utilities` holds every seller's unified utility per row.
    """

    config: BRConfig
    steps: tuple[BRStep, ...]
    profiles: np.ndarray
    utilities: np.ndarray
    final_profile: tuple[float, ...]
    converged: bool

    def post_burn_in(self) -> np.ndarray:
        block = self.profiles[self.config.burn_in + 1 :]
        if block.shape[0] == 0:
            # converged before burn-in: the frozen final profile stands in
            block = self.profiles[-1:]
        return block

    def seller_ranges(self) -> list[tuple[float, float]]:
        block = self.post_burn_in()
        return [(float(block[:, a].min()), float(block[:, a].max())) for a in range(block.shape[1])]


def br_dynamics(instance: MarketInstance, delta_init, config: BRConfig) -> BRTrace:
    """Seeded epsilon-best-response dynamics with a uniformly random mover
    per iteration.

    Convergence is declared after N consecutive no-move picks, confirmed by
    an exhaustive scan over all sellers; the run then stops early.
    """
    delta = as_profile(delta_init, instance.n_sellers)
    n = instance.n_sellers
    rng = np.random.default_rng(config.rng_seed)

    steps: list[BRStep] = []
    profiles = [delta.copy()]
    utilities = [unified_utility(instance, delta)]
    converged = False
    quiet = 0

    for it in range(1, config.max_iters + 1):
        mover = int(rng.integers(n))
        move = epsilon_best_response(instance, delta, mover, config)
        if move is None:
            quiet += 1
        else:
            delta = delta.copy()
            delta[mover] = move
            quiet = 0
        profiles.append(delta.copy())
        utils = unified_utility(instance, delta)
        utilities.append(utils)
        if move is not None:
            steps.append(BRStep(it, mover, tuple(delta), float(utils[mover])))
        if quiet >= n:
            if all(
                epsilon_best_response(instance, delta, a, config) is None for a in range(n)
            ):
                converged = True
                break
            quiet = 0

    return BRTrace(
        config=config,
        steps=tuple(steps),
        profiles=np.asarray(profiles),
        utilities=np.asarray(utilities),
        final_profile=tuple(delta),
        converged=converged,
    )


def menu_members(instance: MarketInstance, delta) -> set[int]:
    """Sellers that appear in at least one menu of the index distribution."""
    bins = bin_structure(instance, delta)
    members: set[int] = set()
    for group, offset in zip(bins.bins, bins.offsets):
        if offset < instance.menu_size:
            members.update(group)
    return members
