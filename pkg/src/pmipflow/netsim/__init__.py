"""Deterministic discrete-event simulation of the mobility domain."""
from .engine import SimEvent, Simulator
from .network import Link
from .nodes import AaaServer, CorrespondentNode, MnInterface, MobileNode
from .runner import RunResult, World, run

__all__ = [
    "AaaServer",
    "CorrespondentNode",
    "Link",
    "MnInterface",
    "MobileNode",
    "RunResult",
    "SimEvent",
    "Simulator",
    "World",
    "run",
]
