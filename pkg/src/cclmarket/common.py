"""Small shared vocabulary: trade direction and order side."""
from __future__ import annotations

from enum import Enum


class Direction(str, Enum):
    BUYER_INITIATED = "buyer_initiated"
    SELLER_INITIATED = "seller_initiated"

    @property
    def code(self) -> int:
        return 1 if self is Direction.BUYER_INITIATED else -1

    @classmethod
    def from_code(cls, code: int) -> "Direction":
        return cls.BUYER_INITIATED if code == 1 else cls.SELLER_INITIATED

    @classmethod
    def parse(cls, text: str) -> "Direction":
        t = text.strip().lower()
        if t in ("buyer_initiated", "buy", "b"):
            return cls.BUYER_INITIATED
        if t in ("seller_initiated", "sell", "s"):
            return cls.SELLER_INITIATED
        raise ValueError(f"unknown direction {text!r}")

    @property
    def short(self) -> str:
        return "buy" if self is Direction.BUYER_INITIATED else "sell"


class Side(str, Enum):
    BUY = "buy"
    SELL = "sell"

    @property
    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY

    @classmethod
    def parse(cls, text: str) -> "Side":
        t = text.strip().lower()
        if t in ("buy", "b", "bid"):
            return cls.BUY
        if t in ("sell", "s", "ask"):
            return cls.SELL
        raise ValueError(f"unknown side {text!r}")

    @property
    def direction(self) -> Direction:
        """Direction of a trade whose taker is on this side."""
        return Direction.BUYER_INITIATED if self is Side.BUY else Direction.SELLER_INITIATED
