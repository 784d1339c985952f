"""Uniform-price auction clearing for a symmetric two-player duopoly.

Everything here is a pure function of (config, offers): dispatch follows
merit order (ascending offers) until inelastic demand is met, the
marginal dispatched offer sets the uniform price, and an exact tie
splits demand in half.  Safe to call from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, ValidationError


@dataclass(frozen=True)
class AuctionConfig:
    """Market parameters. Prices live in [price_floor, price_cap]."""

    capacity_per_player: float = 50.0
    marginal_cost: float = 20.0
    price_cap: float = 100.0
    price_floor: float = -100.0
    demand: float = 70.0
    num_players: int = 2

    def __post_init__(self):
        if self.capacity_per_player <= 0:
            raise ConfigurationError("capacity_per_player must be positive")
        if self.price_floor >= self.price_cap:
            raise ConfigurationError("price_floor must lie below price_cap")
        if self.demand <= 0:
            raise ConfigurationError("demand must be positive")
        if self.marginal_cost < 0:
            raise ConfigurationError("marginal_cost must be non-negative")
        if self.num_players != 2:
            raise ConfigurationError("only the two-player duopoly is supported")

    @property
    def max_profit(self) -> float:
        """Largest attainable per-round profit, used to scale rewards."""
        return (self.price_cap - self.marginal_cost) * self.capacity_per_player


@dataclass(frozen=True)
class ClearingResult:
    clearing_price: float
    quantities: tuple[float, float]
    profits: tuple[float, float]


class MemoryMode(Enum):
    MEMORYLESS = "memoryless"
    LAST_ACTIONS = "last_actions"


def state_dim(mode: MemoryMode) -> int:
    return 1 if mode == MemoryMode.MEMORYLESS else 2


def validate_offer(config: AuctionConfig, offer: float) -> None:
    if not np.isfinite(offer):
        raise ValidationError(f"offer {offer!r} is not finite")
    if offer < config.price_floor or offer > config.price_cap:
        raise ValidationError(
            f"offer {offer} outside [{config.price_floor}, {config.price_cap}]")


def clear_auction(config: AuctionConfig, offers) -> ClearingResult:
    """Clear one auction round for a pair of price offers.

    Offers are dispatched in ascending order until demand is met; the
    last dispatched (marginal) offer sets the uniform price and every
    dispatched unit earns (price - marginal_cost).  An exact tie splits
    total demand in half at the common offer.  Out-of-range offers raise
    ValidationError; they are never clamped.
    """
    if len(offers) != config.num_players:
        raise ValidationError(f"expected {config.num_players} offers")
    p0, p1 = float(offers[0]), float(offers[1])
    validate_offer(config, p0)
    validate_offer(config, p1)
    cap = config.capacity_per_player
    demand = config.demand
    if p0 == p1:
        share = min(demand / 2.0, cap)
        price = p0
        quantities = (share, share)
    else:
        low, high = (0, 1) if p0 < p1 else (1, 0)
        q_low = min(cap, demand)
        q_high = min(cap, demand - q_low)
        price = (p0, p1)[high] if q_high > 0 else (p0, p1)[low]
        quantities = (q_low, q_high) if low == 0 else (q_high, q_low)
    profits = tuple((price - config.marginal_cost) * q for q in quantities)
    return ClearingResult(price, quantities, profits)


def price_to_unit(config: AuctionConfig, price: float) -> float:
    """Affine map [price_floor, price_cap] -> [-1, 1]."""
    span = config.price_cap - config.price_floor
    return 2.0 * (price - config.price_floor) / span - 1.0


def unit_to_price(config: AuctionConfig, unit: float) -> float:
    """Affine map [-1, 1] -> [price_floor, price_cap]."""
    span = config.price_cap - config.price_floor
    return config.price_floor + (unit + 1.0) * 0.5 * span


# Previous offers assumed by the first LAST_ACTIONS episode.
INITIAL_OFFERS = (0.0, 0.0)


def make_state(mode: MemoryMode, previous_offers=None,
               config: AuctionConfig | None = None) -> np.ndarray:
    """Build the (normalized) observation vector for one agent.

    MEMORYLESS ignores the history and returns the constant (0,);
    LAST_ACTIONS scales both previous offers into [-1, 1] in the order
    given (callers pass own offer first).
    """
    if mode == MemoryMode.MEMORYLESS:
        return np.zeros(1)
    if previous_offers is None:
        raise ValidationError("LAST_ACTIONS state needs the previous offers")
    if config is None:
        raise ValidationError("LAST_ACTIONS state needs the auction config")
    return np.array([price_to_unit(config, p) for p in previous_offers])
