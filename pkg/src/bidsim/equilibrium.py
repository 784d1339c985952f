"""Analytic equilibrium set of the duopoly, run-outcome classification,
and a brute-force discretized bimatrix oracle for cross-validation.

Three demand regimes exist.  With q < D < 2q (constrained) the
equilibria pair one offer at the price cap with the other at or below
the undercut threshold (cap - cost) * (D - q) / q + cost.  With D <= q
(unconstrained) competition drives both offers to marginal cost.  With
D >= 2q (uncompetitive) everything sells regardless, and any profile
with at least one offer at the cap is an equilibrium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .env import AuctionConfig, clear_auction
from .errors import ResourceGuardError, ValidationError

DEFAULT_TOL_CAP = 1.0
DEFAULT_TOL_COST = 1.0


class Regime(Enum):
    CONSTRAINED = "constrained"
    UNCONSTRAINED = "unconstrained"
    UNCOMPETITIVE = "uncompetitive"


@dataclass(frozen=True)
class EquilibriumSpec:
    """Analytic description of the equilibrium set for one config.

    CONSTRAINED: low offers up to low_threshold pair with high_price (the
    cap).  UNCONSTRAINED: both fields equal marginal cost.  UNCOMPETITIVE:
    the trivial regime; any profile touching the cap qualifies and
    low_threshold is the cap itself.
    """

    regime: Regime
    low_threshold: float
    high_price: float


@dataclass(frozen=True)
class NEClassification:
    is_equilibrium: bool
    low_bidder_index: int
    final_offers: tuple[float, float]
    tolerance_used: float


def ne_threshold(config: AuctionConfig) -> EquilibriumSpec:
    """Equilibrium spec for a config, with the regime picked from D vs q."""
    q = config.capacity_per_player
    d = config.demand
    c = config.marginal_cost
    cap = config.price_cap
    if d <= q:
        return EquilibriumSpec(Regime.UNCONSTRAINED, c, c)
    if d >= 2.0 * q:
        return EquilibriumSpec(Regime.UNCOMPETITIVE, cap, cap)
    threshold = (cap - c) * (d - q) / q + c
    return EquilibriumSpec(Regime.CONSTRAINED, threshold, cap)


def classify_final(offers, spec: EquilibriumSpec,
                   tol_cap: float = DEFAULT_TOL_CAP,
                   tol_cost: float = DEFAULT_TOL_COST) -> NEClassification:
    """Check a final offer pair against the analytic equilibrium set.

    Constrained: the max offer must reach the cap within tol_cap AND the
    min offer must not exceed the threshold (no slack on that side).
    Unconstrained: both offers within tol_cost of marginal cost.
    Uncompetitive: at least one offer at the cap within tol_cap.
    NaN offers (aborted or empty runs) never classify as equilibrium.
    """
    o = (float(offers[0]), float(offers[1]))
    if not (math.isfinite(o[0]) and math.isfinite(o[1])):
        return NEClassification(False, 0, o, tol_cap)
    low_idx = 0 if o[0] <= o[1] else 1
    if spec.regime == Regime.UNCONSTRAINED:
        cost = spec.low_threshold
        is_eq = abs(o[0] - cost) <= tol_cost and abs(o[1] - cost) <= tol_cost
        return NEClassification(is_eq, low_idx, o, tol_cost)
    if spec.regime == Regime.UNCOMPETITIVE:
        is_eq = max(o) >= spec.high_price - tol_cap
        return NEClassification(is_eq, low_idx, o, tol_cap)
    is_eq = max(o) >= spec.high_price - tol_cap and min(o) <= spec.low_threshold
    return NEClassification(is_eq, low_idx, o, tol_cap)


MAX_GRID_POINTS = 2001


def offer_grid(config: AuctionConfig, grid_step: float) -> np.ndarray:
    """Evenly spaced offers covering [floor, cap], endpoints included."""
    if grid_step <= 0:
        raise ValidationError("grid_step must be positive")
    span = config.price_cap - config.price_floor
    n = int(round(span / grid_step)) + 1
    if n > MAX_GRID_POINTS:
        raise ResourceGuardError(
            f"grid of {n} points exceeds the {MAX_GRID_POINTS}-point guard")
    grid = config.price_floor + grid_step * np.arange(n)
    if abs(grid[-1] - config.price_cap) > 1e-9 * max(1.0, span):
        raise ValidationError("grid_step must evenly divide the offer range")
    grid[-1] = config.price_cap
    return grid


def bimatrix_nash_oracle(config: AuctionConfig,
                         grid_step: float) -> list[tuple[float, float]]:
    """All pure-strategy equilibria of the discretized offer game.

    Builds the full payoff bimatrix through clear_auction and returns
    every cell where both offers are mutual best responses.  Payoff ties
    are kept, so best responses are set-valued.
    """
    grid = offer_grid(config, grid_step)
    n = len(grid)
    pay0 = np.empty((n, n))
    pay1 = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            result = clear_auction(config, (grid[i], grid[j]))
            pay0[i, j] = result.profits[0]
            pay1[i, j] = result.profits[1]
    best0 = pay0 == pay0.max(axis=0, keepdims=True)   # over own offer, per column
    best1 = pay1 == pay1.max(axis=1, keepdims=True)   # over own offer, per row
    ii, jj = np.nonzero(best0 & best1)
    return [(float(grid[i]), float(grid[j])) for i, j in zip(ii, jj)]
