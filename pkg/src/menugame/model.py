"""Core domain types: market instances, price-response models, menus and policies.

Sellers are indexed 0..N-1 internally; every user-facing surface (CLI, JSON
dumps, CSV traces) reports them 1..N.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

E_INV = math.exp(-1.0)

# Relative tolerance under which two competing values count as tied.  Shared
# by the DP optimizer sets, the index-ranking bins and the brute-force oracle
# so that the same borderline instance is resolved identically everywhere.
TIE_TOL = 1e-9

# Probabilities in a randomized policy must sum to one within this slack.
PROB_TOL = 1e-12


def tied(value: float, best: float, tol: float = TIE_TOL) -> bool:
    """True when `value` is within relative tolerance of the maximum `best`."""
    return value >= best - tol * max(abs(best), 1e-12)


class ResponseModel:
    """Purchase-probability curve family: beta_a(p), strictly decreasing in p."""

    tag: str = "abstract"

    def evaluate(self, seller: int, price):
        """Probability that a customer shown seller `seller` at `price` buys."""
        raise NotImplementedError

    def n_sellers(self) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialResponse(ResponseModel):
    """beta_a(p) = exp(-alpha_a * p)."""

    alpha: tuple[float, ...]
    tag: str = field(default="exponential", init=False)

    def evaluate(self, seller: int, price):
        return np.exp(-self.alpha[seller] * np.asarray(price, dtype=float))

    def n_sellers(self) -> int:
        return len(self.alpha)


@dataclass(frozen=True)
class CallableResponse(ResponseModel):
    """Pluggable response model backed by one strictly decreasing callable per seller.

    Each callable must satisfy beta(0) = 1 and 0 < beta(p) <= 1 on [0, p_max].
    """

    curves: tuple[Callable[[float], float], ...]
    tag: str = field(default="custom", init=False)

    def evaluate(self, seller: int, price):
        fn = self.curves[seller]
        arr = np.asarray(price, dtype=float)
        try:
            out = np.asarray(fn(arr), dtype=float)
            if out.shape == arr.shape:
                return float(out) if arr.ndim == 0 else out
        except (TypeError, ValueError):
            pass
        if arr.ndim == 0:
            return float(fn(float(arr)))
        return np.array([fn(float(p)) for p in arr.ravel()]).reshape(arr.shape)

    def n_sellers(self) -> int:
        return len(self.curves)


class InstanceFormatError(ValueError):
    """Raised when an instance JSON document does not match the schema."""


_INSTANCE_KEYS = {"n_sellers", "menu_size", "gamma", "alpha", "cost", "p_max", "response"}


@dataclass(frozen=True)
class MarketInstance:
    """All exogenous parameters of one market.

    `p_max` defaults to 10 * max_a(1/alpha_a), far above every interior price
    optimizer, so the cap never binds unless set explicitly.
    """

    n_sellers: int
    menu_size: int
    gamma: float
    alpha: tuple[float, ...]
    cost: tuple[float, ...]
    p_max: float | None = None
    response: ResponseModel | str = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "cost", tuple(float(c) for c in self.cost))
        n = self.n_sellers
        if n < 1:
            raise ValueError("n_sellers must be positive")
        if not 1 <= self.menu_size <= n:
            raise ValueError(f"menu_size must be in 1..{n}, got {self.menu_size}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if len(self.alpha) != n or len(self.cost) != n:
            raise ValueError("alpha and cost must each have one entry per seller")
        if any(a <= 0 for a in self.alpha):
            raise ValueError("alpha entries must be positive")
        if any(c < 0 for c in self.cost):
            raise ValueError("cost entries must be nonnegative")
        if self.p_max is None:
            object.__setattr__(self, "p_max", 10.0 * max(1.0 / a for a in self.alpha))
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if isinstance(self.response, str):
            if self.response != "exponential":
                raise ValueError(f"unknown response tag {self.response!r}")
            object.__setattr__(self, "response", ExponentialResponse(self.alpha))
        elif not isinstance(self.response, ResponseModel):
            raise ValueError("response must be a tag string or a ResponseModel")
        elif self.response.n_sellers() != n:
            raise ValueError("response model does not cover every seller")

    @property
    def is_exponential(self) -> bool:
        return isinstance(self.response, ExponentialResponse)

    def beta(self, seller: int, price):
        return self.response.evaluate(seller, price)

    def with_gamma(self, gamma: float) -> "MarketInstance":
        return replace(self, gamma=gamma)


def eta(instance: MarketInstance) -> np.ndarray:
    """Per-seller strength factor 1 - cost_a * alpha_a.

    This is the highest commission seller a can sustain with nonnegative
    margin.  May be negative or zero for general instances; the equilibrium
    verifiers report that as a hypothesis violation instead of refusing.
    """
    return 1.0 - np.asarray(instance.cost) * np.asarray(instance.alpha)


def gamma_tilde(instance: MarketInstance) -> float:
    """Effective continuation probability gamma * (1 - e^{-1}).

    Specific to the exponential response family (the skip probability at the
    stand-alone optimal price 1/alpha is 1 - e^{-1}); rejected otherwise.
    """
    if not instance.is_exponential:
        raise ValueError("gamma_tilde is defined only for the exponential response model")
    return instance.gamma * (1.0 - E_INV)


def as_profile(delta: Sequence[float], n_sellers: int) -> np.ndarray:
    """Validate a commission profile: one value per seller, each in [0, 1]."""
    arr = np.asarray(delta, dtype=float)
    if arr.shape != (n_sellers,):
        raise ValueError(f"profile must have {n_sellers} entries, got shape {arr.shape}")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("commissions must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class CommissionProfile:
    """Commission vector delta, one entry in [0, 1] per seller."""

    delta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(float(d) for d in self.delta))
        if any(not 0.0 <= d <= 1.0 for d in self.delta):
            raise ValueError("commissions must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.delta)


Menu = tuple[int, ...]


def validate_menu(menu: Sequence[int], instance: MarketInstance) -> Menu:
    m = tuple(int(a) for a in menu)
    if len(m) != instance.menu_size:
        raise ValueError(f"menu must have {instance.menu_size} positions")
    if len(set(m)) != len(m):
        raise ValueError("menu must not repeat a seller")
    if any(not 0 <= a < instance.n_sellers for a in m):
        raise ValueError("menu references an unknown seller")
    return m


@dataclass(frozen=True)
class PricedMenu:
    """An ordered menu together with the price quoted at each position."""

    menu: Menu
    prices: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "menu", tuple(int(a) for a in self.menu))
        object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))
        if len(self.menu) != len(self.prices):
            raise ValueError("one price per menu position required")
        if len(set(self.menu)) != len(self.menu):
            raise ValueError("menu must not repeat a seller")
        if any(p < 0 for p in self.prices):
            raise ValueError("prices must be nonnegative")

    def price_of(self, seller: int) -> float:
        return self.prices[self.menu.index(seller)]


@dataclass(frozen=True)
class RandomizedPolicy:
    """Finite distribution over priced menus (the platform's fair policy).

    `seller_prices` maps (menu, seller) to the price that seller's item
    carries in that menu; it is derived from the support so it cannot drift
    out of sync with the positional prices.
    """

    support: tuple[tuple[PricedMenu, float], ...]

    def __post_init__(self):
        support = tuple((pm, float(pr)) for pm, pr in self.support)
        object.__setattr__(self, "support", support)
        if not support:
            raise ValueError("policy support must not be empty")
        if any(pr <= 0 for _, pr in support):
            raise ValueError("support probabilities must be strictly positive")
        total = sum(pr for _, pr in support)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"support probabilities sum to {total}, expected 1")

    @property
    def seller_prices(self) -> Mapping[tuple[Menu, int], float]:
        prices: dict[tuple[Menu, int], float] = {}
        for pm, _ in self.support:
            for pos, seller in enumerate(pm.menu):
                prices[(pm.menu, seller)] = pm.prices[pos]
        return prices

    def menus(self) -> list[Menu]:
        return [pm.menu for pm, _ in self.support]

    def is_deterministic(self) -> bool:
        return len(self.support) == 1


def policy_to_json(policy: RandomizedPolicy, value: float | None = None) -> dict:
    """JSON-friendly policy dump; menus are reported with 1-based seller ids."""
    doc: dict = {
        "support": [
            {
                "menu": [a + 1 for a in pm.menu],
                "prices": list(pm.prices),
                "prob": pr,
            }
            for pm, pr in policy.support
        ]
    }
    if value is not None:
        doc["value"] = value
    return doc


def policy_from_json(doc: Mapping) -> RandomizedPolicy:
    support = tuple(
        (PricedMenu(tuple(a - 1 for a in entry["menu"]), tuple(entry["prices"])), entry["prob"])
        for entry in doc["support"]
    )
    return RandomizedPolicy(support)


def load_instance(path: str | Path) -> MarketInstance:
    """Read a market instance from a plain JSON document.

    Schema: {n_sellers, menu_size, gamma, alpha[], cost[], p_max, response}.
    `p_max` may be omitted (default cap applies); unknown keys are rejected.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise InstanceFormatError(f"{path}: top-level value must be an object")
    unknown = set(doc) - _INSTANCE_KEYS
    if unknown:
        raise InstanceFormatError(f"{path}: unknown keys {sorted(unknown)}")
    missing = {"n_sellers", "menu_size", "gamma", "alpha", "cost"} - set(doc)
    if missing:
        raise InstanceFormatError(f"{path}: missing keys {sorted(missing)}")
    try:
        return MarketInstance(
            n_sellers=int(doc["n_sellers"]),
            menu_size=int(doc["menu_size"]),
            gamma=float(doc["gamma"]),
            alpha=tuple(doc["alpha"]),
            cost=tuple(doc["cost"]),
            p_max=float(doc["p_max"]) if "p_max" in doc else None,
            response=doc.get("response", "exponential"),
        )
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"{path}: {exc}") from exc


def save_instance(instance: MarketInstance, path: str | Path) -> None:
    if not instance.is_exponential:
        raise ValueError("only exponential-response instances can be serialized")
    doc = {
        "n_sellers": instance.n_sellers,
        "menu_size": instance.menu_size,
        "gamma": instance.gamma,
        "alpha": list(instance.alpha),
        "cost": list(instance.cost),
        "p_max": instance.p_max,
        "response": "exponential",
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
