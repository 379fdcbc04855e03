"""Links between simulated nodes.

A link carries both signaling messages and data packets with one fixed
latency.  Going down bumps an epoch counter; anything in flight from an
older epoch is dropped on arrival, which models queue flush on interface
reset without tracking individual packets.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass
class Link:
    id: str
    kind: str  # access | tunnel | control | core
    a: str
    b: str
    latency_us: int
    up: bool = True
    loss: float = 0.0
    epoch: int = 0

    def set_up(self, up: bool) -> bool:
        """Flip state; returns True when the state actually changed."""
        if self.up == up:
            return False
        self.up = up
        if not up:
            self.epoch += 1
        return True

    def other(self, node_id: str) -> str:
        if node_id == self.a:
            return self.b
        if node_id == self.b:
            return self.a
        raise KeyError(f"{node_id} is not an endpoint of {self.id}")
