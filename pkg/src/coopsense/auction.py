"""Sequential second-price-plus-increment auction over idle channels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .solutions import NORMALIZED, PayoffVector, normalize_100

DEFAULT_INCREMENT = 1e-4


@dataclass
class AuctionRound:
    winner: int
    channel: int
    price: float
    bid_before: float
    residual: float
    runner_up: int | None
    bids_after: list[float]

    def to_dict(self) -> dict:
        return {
            "winner": self.winner,
            "channel": self.channel,
            "price": self.price,
            "bid_before": self.bid_before,
            "residual": self.residual,
            "runner_up": self.runner_up,
            "bids_after": list(self.bids_after),
        }


@dataclass
class AuctionOutcome:
    rounds: list[AuctionRound]
    allocation: dict[int, int | None]
    balances: np.ndarray
    payments: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def channels_won(self, su: int) -> list[int]:
        return [r.channel for r in self.rounds if r.winner == su]

    def to_dict(self) -> dict:
        return {
            "rounds": [r.to_dict() for r in self.rounds],
            "allocation": {str(ch): su for ch, su in self.allocation.items()},
            "balances": [float(b) for b in self.balances],
            "payments": [float(p) for p in self.payments],
        }


def run_vcg(bids, idle, caps, increment: float = DEFAULT_INCREMENT, wallets=None,
            sole_bidder_price: float | None = None) -> AuctionOutcome:
    """Allocate idle channels one at a time to the current highest bidder.

    The winner takes her highest-capacity unallocated channel and pays the
    runner-up bid plus ``increment`` (clamped to her own bid); a sole bidder
    pays ``sole_bidder_price`` (defaults to ``increment``). The price comes off
    her bid and the loop repeats until channels or positive bids run out.
    Balances are ``wallets`` minus payments; wallets default to the bids.
    """
    if increment <= 0:
        raise ValueError("bid increment must be positive")
    current = np.array(bids, dtype=float)
    if np.any(current < 0):
        raise ValueError("bids must be non-negative")
    caps = np.asarray(caps, dtype=float)
    n = len(current)
    wallet = current.copy() if wallets is None else np.array(wallets, dtype=float)
    if wallet.shape != (n,):
        raise ValueError("wallets and bids differ in length")
    if np.any(current > wallet + 1e-9):
        raise ValueError("a bid exceeds its wallet")
    sole_price = increment if sole_bidder_price is None else sole_bidder_price

    remaining = sorted(set(int(c) for c in idle))
    allocation: dict[int, int | None] = {c: None for c in remaining}
    payments = np.zeros(n)
    rounds: list[AuctionRound] = []
    while remaining:
        bidders = [i for i in range(n) if current[i] > 0]
        if not bidders:
            break
        # stable sort: ties go to the lowest SU index
        order = sorted(bidders, key=lambda i: -current[i])
        winner = order[0]
        runner_up = order[1] if len(order) > 1 else None
        bid = float(current[winner])
        if runner_up is None:
            price = min(sole_price, bid)
        else:
            price = min(float(current[runner_up]) + increment, bid)
        channel = max(remaining, key=lambda c: (caps[winner, c], -c))
        remaining.remove(channel)
        allocation[channel] = winner
        current[winner] = bid - price
        payments[winner] += price
        rounds.append(AuctionRound(winner, channel, price, bid, float(current[winner]),
                                   runner_up, current.tolist()))
    return AuctionOutcome(rounds, allocation, wallet - payments, payments)


def settle_wallets(prev_norm_balance, game_payoff_norm) -> PayoffVector:
    """Bidding budget for a slot: the fresh game payoff, averaged with the
    previous slot's normalised post-auction balance when there is one."""
    current = np.asarray(game_payoff_norm, dtype=float)
    if prev_norm_balance is None:
        return PayoffVector(current.copy(), NORMALIZED)
    prev = np.asarray(prev_norm_balance, dtype=float)
    if prev.shape != current.shape:
        raise ValueError("balance and payoff vectors differ in length")
    if prev.sum() <= 0:
        return PayoffVector(current.copy(), NORMALIZED)
    return PayoffVector(0.5 * (prev + current), NORMALIZED)


def normalized_balance(balances) -> PayoffVector | None:
    """Post-auction balances rescaled to sum to 100; None if nothing is left."""
    balances = np.clip(np.asarray(balances, dtype=float), 0.0, None)
    if balances.sum() <= 0:
        return None
    return normalize_100(balances)
