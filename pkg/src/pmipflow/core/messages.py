"""Protocol message kinds and their typed bodies.

Every message that crosses a simulated link is a ProtocolMessage wrapping one
of the body dataclasses below.  The body type and the kind tag must agree;
the constructor enforces it so a mismatched message can never be built.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .types import InterfaceId, LinkAddr, MnId, NodeId, Prefix


class MessageKind(enum.IntEnum):
    PBU = 1
    PBA = 2
    ROUTER_ADVERTISEMENT = 3
    NEIGHBOR_SOLICITATION = 4
    NEIGHBOR_ADVERTISEMENT = 5
    MIH_REGISTER = 6
    MIH_REGISTER_ACK = 7
    MIH_CAPABILITY_DISCOVER_REQ = 8
    MIH_CAPABILITY_DISCOVER_RESP = 9
    MIH_EVENT_SUBSCRIBE_REQ = 10
    MIH_EVENT_SUBSCRIBE_CONFIRM = 11
    MIH_LINK_UP = 12
    MIH_LINK_DOWN = 13
    AAA_REQUEST = 14
    AAA_RESPONSE = 15


class BindingStatus(enum.IntEnum):
    SUCCESS = 0
    ERROR_ADMIN_PROHIBITED = 1
    ERROR_NO_RESOURCES = 2


class LinkEvent(enum.IntEnum):
    LINK_UP = 1
    LINK_DOWN = 2


@dataclass(frozen=True)
class PbuBody:
    """Proxy binding update sent by a gateway to the anchor."""

    mn_id: MnId
    interface_id: InterfaceId
    hnp: tuple[Prefix, ...]
    lifetime: int  # seconds; 0 deregisters
    sequence: int


@dataclass(frozen=True)
class PbaBody:
    """Proxy binding acknowledgement; echoes the update's sequence."""

    mn_id: MnId
    interface_id: InterfaceId
    hnp: tuple[Prefix, ...]
    lifetime: int
    sequence: int
    status: BindingStatus


@dataclass(frozen=True)
class RouterAdvertisementBody:
    """Unicast advertisement carrying the per-interface prefixes."""

    dest: LinkAddr
    hnp: tuple[Prefix, ...]


@dataclass(frozen=True)
class NeighborSolicitationBody:
    target: LinkAddr


@dataclass(frozen=True)
class NeighborAdvertisementBody:
    target: LinkAddr


@dataclass(frozen=True)
class MihRegisterBody:
    client: NodeId


@dataclass(frozen=True)
class MihRegisterAckBody:
    client: NodeId
    status: int = 0


@dataclass(frozen=True)
class MihCapabilityDiscoverReqBody:
    pass


@dataclass(frozen=True)
class LinkCapability:
    link_id: str
    technology: str
    events: tuple[int, ...]


@dataclass(frozen=True)
class MihCapabilityDiscoverRespBody:
    links: tuple[LinkCapability, ...]


@dataclass(frozen=True)
class MihEventSubscribeReqBody:
    link_id: str
    events: tuple[int, ...]


@dataclass(frozen=True)
class MihEventSubscribeConfirmBody:
    """One confirmation per subscribed event type."""

    link_id: str
    event: int
    status: int = 0


@dataclass(frozen=True)
class MihLinkUpBody:
    link_id: str
    link_addr: LinkAddr


@dataclass(frozen=True)
class MihLinkDownBody:
    link_id: str
    link_addr: LinkAddr


@dataclass(frozen=True)
class AaaRequestBody:
    interface_id: InterfaceId


@dataclass(frozen=True)
class AaaResponseBody:
    interface_id: InterfaceId
    authorized: bool
    mn_id: MnId
    hnp: tuple[Prefix, ...]


BODY_TYPES = {
    MessageKind.PBU: PbuBody,
    MessageKind.PBA: PbaBody,
    MessageKind.ROUTER_ADVERTISEMENT: RouterAdvertisementBody,
    MessageKind.NEIGHBOR_SOLICITATION: NeighborSolicitationBody,
    MessageKind.NEIGHBOR_ADVERTISEMENT: NeighborAdvertisementBody,
    MessageKind.MIH_REGISTER: MihRegisterBody,
    MessageKind.MIH_REGISTER_ACK: MihRegisterAckBody,
    MessageKind.MIH_CAPABILITY_DISCOVER_REQ: MihCapabilityDiscoverReqBody,
    MessageKind.MIH_CAPABILITY_DISCOVER_RESP: MihCapabilityDiscoverRespBody,
    MessageKind.MIH_EVENT_SUBSCRIBE_REQ: MihEventSubscribeReqBody,
    MessageKind.MIH_EVENT_SUBSCRIBE_CONFIRM: MihEventSubscribeConfirmBody,
    MessageKind.MIH_LINK_UP: MihLinkUpBody,
    MessageKind.MIH_LINK_DOWN: MihLinkDownBody,
    MessageKind.AAA_REQUEST: AaaRequestBody,
    MessageKind.AAA_RESPONSE: AaaResponseBody,
}

KIND_FOR_BODY = {body: kind for kind, body in BODY_TYPES.items()}


@dataclass(frozen=True)
class ProtocolMessage:
    kind: MessageKind
    body: object
    src: NodeId
    dst: NodeId
    sent_at: int  # microseconds

    def __post_init__(self) -> None:
        expected = BODY_TYPES[self.kind]
        if type(self.body) is not expected:
            raise TypeError(
                f"{self.kind.name} needs {expected.__name__}, got {type(self.body).__name__}"
            )

    @classmethod
    def make(cls, body: object, src: NodeId, dst: NodeId, sent_at: int) -> "ProtocolMessage":
        kind = KIND_FOR_BODY.get(type(body))
        if kind is None:
            raise TypeError(f"no message kind for body {type(body).__name__}")
        return cls(kind, body, src, dst, sent_at)
