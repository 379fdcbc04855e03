"""Canonical wire encoding for protocol messages.

Layout: one kind tag byte, a 16-bit big-endian body length, the body fields
in declaration order, then the envelope (src, dst, sent_at).  Strings are
UTF-8 with a 16-bit length prefix, lists carry an 8-bit count, integers are
big-endian and unsigned.  Decoding is strict: trailing bytes, short reads
and out-of-range values all raise MalformedMessage.
"""
from __future__ import annotations

from .messages import (
    AaaRequestBody,
    AaaResponseBody,
    BindingStatus,
    LinkCapability,
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
from .types import InterfaceId, LinkAddr, Prefix


class MalformedMessage(Exception):
    pass


class _Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def raw(self, data: bytes) -> None:
        self.parts.append(data)

    def uint(self, value: int, width: int) -> None:
        if not 0 <= value < 1 << (8 * width):
            raise ValueError(f"value {value} does not fit in {width} bytes")
        self.parts.append(value.to_bytes(width, "big"))

    def string(self, text: str) -> None:
        data = text.encode("utf-8")
        self.uint(len(data), 2)
        self.raw(data)

    def link_addr(self, addr: LinkAddr) -> None:
        self.raw(addr.octets)

    def interface_id(self, iface: InterfaceId) -> None:
        self.raw(iface.octets)

    def prefix(self, p: Prefix) -> None:
        self.raw(p.address)
        self.uint(p.length, 1)

    def prefix_list(self, items: tuple[Prefix, ...]) -> None:
        self.uint(len(items), 1)
        for p in items:
            self.prefix(p)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedMessage(f"short read: wanted {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def uint(self, width: int) -> int:
        return int.from_bytes(self.take(width), "big")

    def string(self) -> str:
        n = self.uint(2)
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedMessage("invalid utf-8 in string field") from exc

    def link_addr(self) -> LinkAddr:
        return LinkAddr(self.take(6))

    def interface_id(self) -> InterfaceId:
        return InterfaceId(self.take(8))

    def prefix(self) -> Prefix:
        addr = self.take(16)
        length = self.uint(1)
        try:
            return Prefix(addr, length)
        except ValueError as exc:
            raise MalformedMessage(str(exc)) from exc

    def prefix_list(self) -> tuple[Prefix, ...]:
        return tuple(self.prefix() for _ in range(self.uint(1)))

    def boolean(self) -> bool:
        v = self.uint(1)
        if v not in (0, 1):
            raise MalformedMessage(f"boolean field holds {v}")
        return v == 1

    def done(self) -> bool:
        return self.pos == len(self.data)


def _encode_body(body: object, w: _Writer) -> None:
    if isinstance(body, PbuBody):
        w.string(body.mn_id)
        w.interface_id(body.interface_id)
        w.prefix_list(body.hnp)
        w.uint(body.lifetime, 4)
        w.uint(body.sequence, 2)
    elif isinstance(body, PbaBody):
        w.string(body.mn_id)
        w.interface_id(body.interface_id)
        w.prefix_list(body.hnp)
        w.uint(body.lifetime, 4)
        w.uint(body.sequence, 2)
        w.uint(int(body.status), 1)
    elif isinstance(body, RouterAdvertisementBody):
        w.link_addr(body.dest)
        w.prefix_list(body.hnp)
    elif isinstance(body, (NeighborSolicitationBody, NeighborAdvertisementBody)):
        w.link_addr(body.target)
    elif isinstance(body, MihRegisterBody):
        w.string(body.client)
    elif isinstance(body, MihRegisterAckBody):
        w.string(body.client)
        w.uint(body.status, 1)
    elif isinstance(body, MihCapabilityDiscoverReqBody):
        pass
    elif isinstance(body, MihCapabilityDiscoverRespBody):
        w.uint(len(body.links), 1)
        for cap in body.links:
            w.string(cap.link_id)
            w.string(cap.technology)
            w.uint(len(cap.events), 1)
            for ev in cap.events:
                w.uint(ev, 1)
    elif isinstance(body, MihEventSubscribeReqBody):
        w.string(body.link_id)
        w.uint(len(body.events), 1)
        for ev in body.events:
            w.uint(ev, 1)
    elif isinstance(body, MihEventSubscribeConfirmBody):
        w.string(body.link_id)
        w.uint(body.event, 1)
        w.uint(body.status, 1)
    elif isinstance(body, (MihLinkUpBody, MihLinkDownBody)):
        w.string(body.link_id)
        w.link_addr(body.link_addr)
    elif isinstance(body, AaaRequestBody):
        w.interface_id(body.interface_id)
    elif isinstance(body, AaaResponseBody):
        w.interface_id(body.interface_id)
        w.uint(1 if body.authorized else 0, 1)
        w.string(body.mn_id)
        w.prefix_list(body.hnp)
    else:
        raise TypeError(f"cannot encode body {type(body).__name__}")


def _decode_body(kind: MessageKind, r: _Reader) -> object:
    if kind is MessageKind.PBU:
        return PbuBody(r.string(), r.interface_id(), r.prefix_list(), r.uint(4), r.uint(2))
    if kind is MessageKind.PBA:
        mn_id = r.string()
        iface = r.interface_id()
        hnp = r.prefix_list()
        lifetime = r.uint(4)
        sequence = r.uint(2)
        raw_status = r.uint(1)
        try:
            status = BindingStatus(raw_status)
        except ValueError as exc:
            raise MalformedMessage(f"unknown binding status {raw_status}") from exc
        return PbaBody(mn_id, iface, hnp, lifetime, sequence, status)
    if kind is MessageKind.ROUTER_ADVERTISEMENT:
        return RouterAdvertisementBody(r.link_addr(), r.prefix_list())
    if kind is MessageKind.NEIGHBOR_SOLICITATION:
        return NeighborSolicitationBody(r.link_addr())
    if kind is MessageKind.NEIGHBOR_ADVERTISEMENT:
        return NeighborAdvertisementBody(r.link_addr())
    if kind is MessageKind.MIH_REGISTER:
        return MihRegisterBody(r.string())
    if kind is MessageKind.MIH_REGISTER_ACK:
        return MihRegisterAckBody(r.string(), r.uint(1))
    if kind is MessageKind.MIH_CAPABILITY_DISCOVER_REQ:
        return MihCapabilityDiscoverReqBody()
    if kind is MessageKind.MIH_CAPABILITY_DISCOVER_RESP:
        caps = []
        for _ in range(r.uint(1)):
            link_id = r.string()
            technology = r.string()
            events = tuple(r.uint(1) for _ in range(r.uint(1)))
            caps.append(LinkCapability(link_id, technology, events))
        return MihCapabilityDiscoverRespBody(tuple(caps))
    if kind is MessageKind.MIH_EVENT_SUBSCRIBE_REQ:
        link_id = r.string()
        events = tuple(r.uint(1) for _ in range(r.uint(1)))
        return MihEventSubscribeReqBody(link_id, events)
    if kind is MessageKind.MIH_EVENT_SUBSCRIBE_CONFIRM:
        return MihEventSubscribeConfirmBody(r.string(), r.uint(1), r.uint(1))
    if kind is MessageKind.MIH_LINK_UP:
        return MihLinkUpBody(r.string(), r.link_addr())
    if kind is MessageKind.MIH_LINK_DOWN:
        return MihLinkDownBody(r.string(), r.link_addr())
    if kind is MessageKind.AAA_REQUEST:
        return AaaRequestBody(r.interface_id())
    if kind is MessageKind.AAA_RESPONSE:
        iface = r.interface_id()
        authorized = r.boolean()
        return AaaResponseBody(iface, authorized, r.string(), r.prefix_list())
    raise MalformedMessage(f"unhandled kind {kind}")


def encode(msg: ProtocolMessage) -> bytes:
    body_w = _Writer()
    _encode_body(msg.body, body_w)
    body = body_w.getvalue()

    w = _Writer()
    w.uint(int(msg.kind), 1)
    w.uint(len(body), 2)
    w.raw(body)
    w.string(msg.src)
    w.string(msg.dst)
    w.uint(msg.sent_at, 8)
    return w.getvalue()


def decode(data: bytes) -> ProtocolMessage:
    r = _Reader(data)
    raw_kind = r.uint(1)
    try:
        kind = MessageKind(raw_kind)
    except ValueError as exc:
        raise MalformedMessage(f"unknown message kind {raw_kind}") from exc

    body_len = r.uint(2)
    body_bytes = r.take(body_len)
    body_r = _Reader(body_bytes)
    body = _decode_body(kind, body_r)
    if not body_r.done():
        raise MalformedMessage(
            f"{body_len - body_r.pos} trailing bytes inside {kind.name} body"
        )

    src = r.string()
    dst = r.string()
    sent_at = r.uint(8)
    if not r.done():
        raise MalformedMessage(f"{len(data) - r.pos} trailing bytes after envelope")
    return ProtocolMessage(kind, body, src, dst, sent_at)
