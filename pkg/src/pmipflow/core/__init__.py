"""Shared types, message definitions and the canonical wire codec."""

from .codec import MalformedMessage, decode, encode
from .messages import (
    AaaRequestBody,
    AaaResponseBody,
    BindingStatus,
    LinkCapability,
    LinkEvent,
    MessageKind,
    MihCapabilityDiscoverReqBody,
    MihCapabilityDiscoverRespBody,
    MihEventSubscribeConfirmBody,
    MihEventSubscribeReqBody,
    MihLinkDownBody,
    MihLinkUpBody,
    MihRegisterAckBody,
    MihRegisterBody,
    NeighborAdvertisementBody,
    NeighborSolicitationBody,
    PbaBody,
    PbuBody,
    ProtocolMessage,
    RouterAdvertisementBody,
)
from .types import (
    US_PER_MS,
    US_PER_S,
    InterfaceId,
    LinkAddr,
    MnId,
    NodeId,
    Packet,
    Prefix,
    TrafficSelector,
    eui64_from_link_addr,
    format_ip6,
    format_us,
    ms_to_us,
    parse_ip6,
)

__all__ = [
    "AaaRequestBody",
    "AaaResponseBody",
    "BindingStatus",
    "InterfaceId",
    "LinkAddr",
    "LinkCapability",
    "LinkEvent",
    "MalformedMessage",
    "MessageKind",
    "MihCapabilityDiscoverReqBody",
    "MihCapabilityDiscoverRespBody",
    "MihEventSubscribeConfirmBody",
    "MihEventSubscribeReqBody",
    "MihLinkDownBody",
    "MihLinkUpBody",
    "MihRegisterAckBody",
    "MihRegisterBody",
    "MnId",
    "NeighborAdvertisementBody",
    "NeighborSolicitationBody",
    "NodeId",
    "Packet",
    "PbaBody",
    "PbuBody",
    "Prefix",
    "ProtocolMessage",
    "RouterAdvertisementBody",
    "TrafficSelector",
    "US_PER_MS",
    "US_PER_S",
    "decode",
    "encode",
    "eui64_from_link_addr",
    "format_ip6",
    "format_us",
    "ms_to_us",
    "parse_ip6",
]
