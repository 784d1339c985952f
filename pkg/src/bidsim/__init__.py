"""bidsim: multi-agent DDPG bidding in capacity-constrained uniform-price
auctions, benchmarked against the analytically known equilibrium set."""

__version__ = "0.1.0"
